//! Limited-memory BFGS with a strong-Wolfe line search (bracketing plus
//! cubic-interpolation zoom).

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when `||g||_inf <= grad_tol`.
    pub grad_tol: f64,
    /// Stop when the relative decrease over one step falls below this.
    pub f_rel_tol: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 20,
            max_iter: 5000,
            grad_tol: 1e-10,
            f_rel_tol: 1e-15,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    GradientTolerance,
    FunctionTolerance,
    MaxIterations,
    /// No step satisfying the Wolfe conditions was found; usually means the
    /// iterate is already at the limit of floating-point resolution.
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_inf: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

struct Objective<'a, F> {
    f: &'a mut F,
    evals: usize,
    iter: usize,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Objective<'_, F> {
    fn eval(&mut self, x: &[f64], g: &mut [f64]) -> Result<f64> {
        self.evals += 1;
        let v = (self.f)(x, g);
        if !v.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical {
                iteration: self.iter,
                message: format!("non-finite objective or gradient (f = {v})"),
            });
        }
        Ok(v)
    }
}

/// Minimizes `f`, which returns the value and writes the gradient into its
/// second argument.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions) -> Result<LbfgsResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut obj = Objective { f: &mut f, evals: 0, iter: 0 };
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = obj.eval(&x, &mut g)?;
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut status = Status::MaxIterations;
    let mut iterations = 0;

    for it in 0..opts.max_iter {
        obj.iter = it;
        iterations = it;
        if inf_norm(&g) <= opts.grad_tol {
            status = Status::GradientTolerance;
            break;
        }
        let mut dir = two_loop(&g, &hist);
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let alpha0 = if hist.is_empty() { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };
        let ls = line_search(&mut obj, &x, fx, &dir, slope, alpha0, opts)?;
        let Some((alpha, f_new, g_new)) = ls else {
            if hist.is_empty() {
                status = Status::LineSearchStalled;
                break;
            }
            hist.clear();
            continue;
        };
        let s: Vec<f64> = dir.iter().map(|d| alpha * d).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        let decrease = fx - f_new;
        fx = f_new;
        g = g_new;
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        if decrease.abs() <= opts.f_rel_tol * fx.abs().max(1.0) {
            iterations = it + 1;
            status = Status::FunctionTolerance;
            break;
        }
        iterations = it + 1;
    }
    Ok(LbfgsResult { grad_inf: inf_norm(&g), x, f: fx, iterations, evaluations: obj.evals, status })
}

fn two_loop(g: &[f64], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, clamped
/// into the interior of the interval.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let fallback = 0.5 * (a + b);
    if disc < 0.0 {
        return fallback;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    let margin = 0.1 * (hi - lo);
    if !t.is_finite() || t < lo + margin || t > hi - margin {
        fallback
    } else {
        t
    }
}

type Step = Option<(f64, f64, Vec<f64>)>;

#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    obj: &mut Objective<'_, F>,
    x: &[f64],
    f0: f64,
    dir: &[f64],
    slope0: f64,
    alpha0: f64,
    opts: &LbfgsOptions,
) -> Result<Step>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let mut trial = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut eval = |obj: &mut Objective<'_, F>, alpha: f64, g: &mut Vec<f64>| -> Result<(f64, f64)> {
        for ((t, xi), di) in trial.iter_mut().zip(x).zip(dir) {
            *t = xi + alpha * di;
        }
        let fv = obj.eval(&trial, g)?;
        Ok((fv, dot(g, dir)))
    };

    let mut a_prev = 0.0;
    let mut f_prev = f0;
    let mut d_prev = slope0;
    let mut alpha = alpha0;
    for i in 0..opts.max_line_search {
        let (fa, da) = eval(obj, alpha, &mut g)?;
        if fa > f0 + opts.c1 * alpha * slope0 || (i > 0 && fa >= f_prev) {
            return zoom(obj, &mut eval, n, (a_prev, f_prev, d_prev), (alpha, fa, da), f0, slope0, opts);
        }
        if da.abs() <= -opts.c2 * slope0 {
            return Ok(Some((alpha, fa, g)));
        }
        if da >= 0.0 {
            return zoom(obj, &mut eval, n, (alpha, fa, da), (a_prev, f_prev, d_prev), f0, slope0, opts);
        }
        a_prev = alpha;
        f_prev = fa;
        d_prev = da;
        alpha *= 2.0;
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn zoom<F, E>(
    obj: &mut Objective<'_, F>,
    eval: &mut E,
    n: usize,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
    f0: f64,
    slope0: f64,
    opts: &LbfgsOptions,
) -> Result<Step>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    E: FnMut(&mut Objective<'_, F>, f64, &mut Vec<f64>) -> Result<(f64, f64)>,
{
    let mut best: Step = None;
    for _ in 0..opts.max_line_search {
        if (hi.0 - lo.0).abs() <= 1e-16 * lo.0.abs().max(1e-300) {
            break;
        }
        let a = cubic_min(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2);
        let mut gbuf = vec![0.0; n];
        let (fa, da) = eval(obj, a, &mut gbuf)?;
        if fa > f0 + opts.c1 * a * slope0 || fa >= lo.1 {
            hi = (a, fa, da);
        } else {
            if da.abs() <= -opts.c2 * slope0 {
                return Ok(Some((a, fa, gbuf)));
            }
            if da * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, fa, da);
            best = Some((a, fa, gbuf));
        }
    }
    // Accept a sufficient-decrease point if curvature could not be met.
    Ok(best.filter(|(a, f, _)| *a > 0.0 && *f < f0))
}

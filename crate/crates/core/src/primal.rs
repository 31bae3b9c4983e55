//! Boundary-point solver for the primal relaxation
//!
//! ```text
//! minimize Tr(K D)  s.t.  Tr D = N(N-1)/2,  D >= 0,  Q(D) >= 0,  G(D) >= 0.
//! ```
//!
//! The lifted matrices are carried as separate PSD blocks `x = (D, Q, G)`
//! tied to `D` by the linear constraints `Q - Qlin(D) = I` and
//! `G - Glin(D) = 0`. Each iteration solves `A A^T y = A(c - z) + (b - A x)/sigma`
//! by conjugate gradients, splits `M = c - A^T y - x/sigma` into its PSD and
//! negative parts (`z = P+(M)`, `x = sigma P+(-M)`), and adapts `sigma` when
//! the primal and dual residuals drift apart.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::hamiltonian::ReducedHamiltonian;
use crate::nrep::{g2_adjoint, g2_linear, n_pairs, q2_linear, q2_linear_adjoint, t2_matrix, Condition, ConditionSet, TwoRdm};
use crate::pairspace::{min_eigenvalue, PackedMatrix, PairBasis};
use crate::par;
use crate::report::{IterationRecord, SolveReport};

#[derive(Debug, Clone)]
pub struct PrimalProblem {
    pub ham: ReducedHamiltonian,
    /// Q2 and G2 are optional; T2 is rejected.
    pub conditions: ConditionSet,
    /// Target for the relative primal residual, dual residual and gap.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Initial augmented-Lagrangian step.
    pub sigma: f64,
    /// Record an [`IterationRecord`] every this many iterations.
    pub log_every: usize,
}

impl PrimalProblem {
    pub fn new(ham: ReducedHamiltonian, conditions: ConditionSet) -> Self {
        Self { ham, conditions, tolerance: 1e-6, max_iterations: 20_000, sigma: 1.0, log_every: 100 }
    }
}

/// Primal variables, one block per imposed condition.
#[derive(Debug, Clone)]
struct Blocks {
    d: DMatrix<f64>,
    q: Option<DMatrix<f64>>,
    g: Option<DMatrix<f64>>,
}

/// Multipliers of the linear constraints: trace, Q-link, G-link.
#[derive(Debug, Clone)]
struct Mult {
    t: f64,
    q: Option<DMatrix<f64>>,
    g: Option<DMatrix<f64>>,
}

fn zip_opt(a: &Option<DMatrix<f64>>, b: &Option<DMatrix<f64>>, f: impl Fn(&DMatrix<f64>, &DMatrix<f64>) -> f64) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => f(a, b),
        _ => 0.0,
    }
}

fn axpy_opt(y: &mut Option<DMatrix<f64>>, alpha: f64, x: &Option<DMatrix<f64>>) {
    if let (Some(y), Some(x)) = (y.as_mut(), x.as_ref()) {
        y.zip_apply(x, |a, b| *a += alpha * b);
    }
}

impl Mult {
    fn dot(&self, o: &Mult) -> f64 {
        self.t * o.t + zip_opt(&self.q, &o.q, |a, b| a.dot(b)) + zip_opt(&self.g, &o.g, |a, b| a.dot(b))
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn axpy(&mut self, alpha: f64, x: &Mult) {
        self.t += alpha * x.t;
        axpy_opt(&mut self.q, alpha, &x.q);
        axpy_opt(&mut self.g, alpha, &x.g);
    }
}

impl Blocks {
    fn dot(&self, o: &Blocks) -> f64 {
        self.d.dot(&o.d) + zip_opt(&self.q, &o.q, |a, b| a.dot(b)) + zip_opt(&self.g, &o.g, |a, b| a.dot(b))
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn axpy(&mut self, alpha: f64, x: &Blocks) {
        self.d.zip_apply(&x.d, |a, b| *a += alpha * b);
        axpy_opt(&mut self.q, alpha, &x.q);
        axpy_opt(&mut self.g, alpha, &x.g);
    }
}

struct Operator {
    basis: PairBasis,
    n: usize,
    q: bool,
    g: bool,
}

impl Operator {
    fn packed(&self, m: &DMatrix<f64>) -> PackedMatrix {
        PackedMatrix::from_matrix_unchecked(self.basis, m.clone())
    }

    fn apply(&self, x: &Blocks) -> Mult {
        let dp = self.packed(&x.d);
        let (q, g) = par::join(
            || x.q.as_ref().map(|xq| xq - q2_linear(&dp, self.n).into_matrix()),
            || x.g.as_ref().map(|xg| xg - g2_linear(&dp, self.n)),
        );
        Mult { t: x.d.trace(), q, g }
    }

    fn adjoint(&self, y: &Mult) -> Blocks {
        let dim = self.basis.dim();
        let d = DMatrix::identity(dim, dim) * y.t - self.link_adjoint(y);
        Blocks { d, q: y.q.clone(), g: y.g.clone() }
    }

    /// `(0, Qlin d, Glin d)`
    fn link(&self, d: &DMatrix<f64>) -> Mult {
        let dp = self.packed(d);
        let (q, g) = par::join(
            || self.q.then(|| q2_linear(&dp, self.n).into_matrix()),
            || self.g.then(|| g2_linear(&dp, self.n)),
        );
        Mult { t: 0.0, q, g }
    }

    /// Adjoint of [`Self::link`], ignoring the trace component.
    fn link_adjoint(&self, y: &Mult) -> DMatrix<f64> {
        let dim = self.basis.dim();
        let (qa, ga) = par::join(
            || y.q.as_ref().map(|yq| q2_linear_adjoint(&self.packed(yq), self.n).into_matrix()),
            || y.g.as_ref().map(|yg| g2_adjoint(yg, self.basis, self.n).into_matrix()),
        );
        let mut d = DMatrix::zeros(dim, dim);
        if let Some(qa) = qa {
            d += qa;
        }
        if let Some(ga) = ga {
            d += ga;
        }
        d
    }

    fn ltl(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        self.link_adjoint(&self.link(d))
    }

    fn zero_mult(&self) -> Mult {
        let dim = self.basis.dim();
        let r = self.basis.r();
        Mult {
            t: 0.0,
            q: self.q.then(|| DMatrix::zeros(dim, dim)),
            g: self.g.then(|| DMatrix::zeros(r * r, r * r)),
        }
    }

    /// `b = (N(N-1)/2, I, 0)`.
    fn rhs(&self) -> Mult {
        let mut b = self.zero_mult();
        b.t = n_pairs(self.n);
        if let Some(q) = b.q.as_mut() {
            q.fill_with_identity();
        }
        b
    }

    /// Traces that every feasible `(D, Q(D), G(D))` must have; used to turn
    /// an approximately dual-feasible `y` into a certified lower bound.
    fn block_traces(&self) -> (f64, f64, f64) {
        let r = self.basis.r() as f64;
        let n = self.n as f64;
        let np = n_pairs(self.n);
        let dim = self.basis.dim() as f64;
        (np, dim - (r - 1.0) * n + np, n * (r - n + 1.0))
    }
}

/// Orthonormal coordinates of a symmetric matrix (off-diagonals scaled by
/// `sqrt 2`), so Frobenius inner products become dot products.
fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut v = DVector::zeros(n * (n + 1) / 2);
    let mut k = 0;
    for j in 0..n {
        v[k] = m[(j, j)];
        k += 1;
        for i in j + 1..n {
            v[k] = std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]);
            k += 1;
        }
    }
    v
}

fn smat(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            let x = v[k] * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// Direct solver for `A A^T y = rho`.
///
/// With `A(x) = (Tr x_d, x_q - Qlin x_d, x_g - Glin x_d)` the link rows give
/// `S = I + L L^T` for `L = (Qlin, Glin)`, which Woodbury reduces to the
/// D-space operator `M = I + L^T L`; the trace row is a scalar Schur
/// complement `s = Tr(M^{-1} I)`. `M` is assembled once and Cholesky-factored.
struct NormalSolver {
    chol: Cholesky<f64, Dyn>,
    schur: f64,
    /// `L(I)`
    l_id: Mult,
    /// `L^T L (I)`
    ltl_id: DMatrix<f64>,
}

impl NormalSolver {
    fn new(op: &Operator) -> Result<Self> {
        let dim = op.basis.dim();
        let len = dim * (dim + 1) / 2;
        let cols = par::map_range(len, |k| {
            let mut e = DVector::zeros(len);
            e[k] = 1.0;
            let em = smat(&e, dim);
            let mut col = svec(&op.ltl(&em));
            col[k] += 1.0;
            col
        });
        let m = DMatrix::from_columns(&cols);
        let m = (&m + m.transpose()) * 0.5;
        let chol = Cholesky::new(m).ok_or_else(|| Error::Numerical {
            iteration: 0,
            message: "normal operator is not positive definite".into(),
        })?;
        let id = DMatrix::identity(dim, dim);
        let schur = svec(&id).dot(&chol.solve(&svec(&id)));
        Ok(Self { chol, schur, l_id: op.link(&id), ltl_id: op.ltl(&id) })
    }

    fn m_inv(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        smat(&self.chol.solve(&svec(u)), u.nrows())
    }

    fn solve(&self, op: &Operator, rho: &Mult) -> Mult {
        // L^T applied to the link part of rho
        let u = op.link_adjoint(rho);
        let t = (rho.t + self.m_inv(&u).trace()) / self.schur;
        // rho' + t L(I), then S^{-1} via Woodbury
        let mut v = rho.clone();
        v.t = 0.0;
        v.axpy(t, &self.l_id);
        let w = &u + &self.ltl_id * t;
        let mut y = v;
        y.axpy(-1.0, &op.link(&self.m_inv(&w)));
        y.t = t;
        y
    }
}

/// `(P+(m), P+(-m))` from one eigendecomposition.
fn split(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let mut vw = eig.eigenvectors.clone();
    for (k, &w) in eig.eigenvalues.iter().enumerate() {
        vw.column_mut(k).scale_mut(w.max(0.0));
    }
    let pos = vw * eig.eigenvectors.transpose();
    let neg = &pos - m;
    (pos, neg)
}

fn min_eig_opt(m: &Option<DMatrix<f64>>) -> f64 {
    m.as_ref().map_or(0.0, min_eigenvalue)
}

/// Runs the boundary-point iteration.
pub fn solve_primal(problem: &PrimalProblem) -> Result<SolveReport> {
    let start = Instant::now();
    let ham = &problem.ham;
    let n = ham.n;
    let basis = ham.basis();
    let r = basis.r();
    if n < 2 || n > r {
        return Err(Error::InvalidInput(format!("{n} particles in {r} spin orbitals")));
    }
    if problem.conditions.t2 {
        return Err(Error::InvalidInput("T2 is only available in the dual solver".into()));
    }
    let op = Operator { basis, n, q: problem.conditions.q2, g: problem.conditions.g2 };
    let dim = basis.dim();
    let np = n_pairs(n);
    let b = op.rhs();
    let c = Blocks {
        d: ham.k.matrix().clone(),
        q: op.q.then(|| DMatrix::zeros(dim, dim)),
        g: op.g.then(|| DMatrix::zeros(r * r, r * r)),
    };
    let c_norm = c.norm();
    let b_norm = b.norm();

    let d0 = PackedMatrix::from_matrix_unchecked(basis, DMatrix::identity(dim, dim) * (np / dim as f64));
    let mut x = Blocks {
        d: d0.matrix().clone(),
        q: op.q.then(|| TwoRdm::new(d0.clone(), n).lift_q2().into_matrix()),
        g: op.g.then(|| g2_linear(&d0, n)),
    };
    let mut z = Blocks { d: DMatrix::zeros(dim, dim), q: c.q.clone(), g: c.g.clone() };
    let mut y = op.zero_mult();
    let mut sigma = problem.sigma;
    let traces = op.block_traces();
    let normal = NormalSolver::new(&op)?;

    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let (mut rp, mut rd) = (f64::INFINITY, f64::INFINITY);

    for it in 1..=problem.max_iterations.max(1) {
        iterations = it;
        // y-update
        let mut cz = c.clone();
        cz.axpy(-1.0, &z);
        let mut rhs = op.apply(&cz);
        let mut infeas = b.clone();
        infeas.axpy(-1.0, &op.apply(&x));
        rhs.axpy(1.0 / sigma, &infeas);
        y = normal.solve(&op, &rhs);

        // z- and x-updates
        let aty = op.adjoint(&y);
        let mut m = c.clone();
        m.axpy(-1.0, &aty);
        m.axpy(-1.0 / sigma, &x);
        let ((zd, xd), ((zq, xq), (zg, xg))) = par::join(
            || split(&m.d),
            || par::join(|| m.q.as_ref().map(split).unzip(), || m.g.as_ref().map(split).unzip()),
        );
        let x_new = Blocks { d: xd * sigma, q: xq.map(|v| v * sigma), g: xg.map(|v| v * sigma) };
        z = Blocks { d: zd, q: zq, g: zg };

        // residuals
        let mut step = x_new.clone();
        step.axpy(-1.0, &x);
        rd = step.norm() / sigma / (1.0 + c_norm);
        x = x_new;
        let mut ax_b = op.apply(&x);
        ax_b.axpy(-1.0, &b);
        rp = ax_b.norm() / (1.0 + b_norm);
        let pobj = c.dot(&x);
        let dobj = b.dot(&y);
        let rgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

        let done = rp.max(rd).max(rgap) <= problem.tolerance;
        let log = problem.log_every > 0 && it % problem.log_every == 0;
        if log || done || it == problem.max_iterations {
            let lb = certified_bound(&c, &aty, &y, &b, traces);
            if log {
                history.push(IterationRecord {
                    iteration: it,
                    energy: pobj + ham.core_energy,
                    lower_bound: lb + ham.core_energy,
                    residual: rp.max(rd).max(rgap),
                });
            }
        }
        if !(pobj.is_finite() && dobj.is_finite()) {
            return Err(Error::Numerical { iteration: it, message: "non-finite objective".into() });
        }
        if done {
            converged = true;
            break;
        }
        if it % 10 == 0 {
            if rp > 10.0 * rd {
                sigma /= 2.0;
            } else if rd > 10.0 * rp {
                sigma *= 2.0;
            }
        }
    }

    let aty = op.adjoint(&y);
    let lb = certified_bound(&c, &aty, &y, &b, traces);
    // Exact trace normalization; the correction is of the order of the residual.
    let tr = x.d.trace();
    let d = if tr > 0.0 { x.d.clone() * (np / tr) } else { x.d.clone() };
    let rdm = restore_feasibility(TwoRdm::new(PackedMatrix::from_matrix_unchecked(basis, d), n), problem.conditions);
    let pobj = ham.k.inner(&rdm.d)?;
    let dobj = b.dot(&y);
    let residual_gap = (pobj - dobj).abs().max(pobj - lb).max(0.0);
    let energy = pobj + ham.core_energy;
    Ok(SolveReport {
        energy,
        lower_bound: energy - residual_gap,
        rdm,
        residual_primal: rp,
        residual_dual: rd,
        residual_gap,
        iterations,
        converged,
        wall_time: start.elapsed(),
        history,
    })
}

/// Mixes in just enough of the maximally mixed 2-RDM (whose lifts are
/// positive definite) to remove residual negative eigenvalues of `D`, `Q(D)`
/// and `G(D)` left by the inexact iteration. The trace is unchanged.
fn restore_feasibility(rdm: TwoRdm, conditions: ConditionSet) -> TwoRdm {
    let basis = rdm.basis();
    let dim = basis.dim();
    let np = rdm.n_pairs();
    let here = check_feasibility(&rdm, conditions);
    if here.worst() >= 0.0 {
        return rdm;
    }
    let mixed = PackedMatrix::from_matrix_unchecked(basis, DMatrix::identity(dim, dim) * (np / dim as f64));
    let there = check_feasibility(&TwoRdm::new(mixed.clone(), rdm.n), conditions);
    let mut t: f64 = 0.0;
    for ((_, a), (_, b)) in here.min_eigenvalues.iter().zip(&there.min_eigenvalues) {
        if *a < 0.0 {
            if *b <= 0.0 {
                return rdm;
            }
            t = t.max(-a / (b - a));
        }
    }
    let t = (t * (1.0 + 1e-8)).min(1.0);
    let d = rdm.d.scaled(1.0 - t).add_scaled(&mixed, t).expect("same basis");
    TwoRdm::new(d, rdm.n)
}

/// `b^T y + sum_blocks min(0, lambda_min(c - A^T y)) * Tr(block)`: a lower
/// bound on the relaxation optimum for any `y` (electronic energy).
fn certified_bound(c: &Blocks, aty: &Blocks, y: &Mult, b: &Mult, traces: (f64, f64, f64)) -> f64 {
    let s_d = &c.d - &aty.d;
    let s_q = c.q.as_ref().zip(aty.q.as_ref()).map(|(a, b)| a - b);
    let s_g = c.g.as_ref().zip(aty.g.as_ref()).map(|(a, b)| a - b);
    let (ld, (lq, lg)) = par::join(|| min_eigenvalue(&s_d), || par::join(|| min_eig_opt(&s_q), || min_eig_opt(&s_g)));
    b.dot(y) + ld.min(0.0) * traces.0 + lq.min(0.0) * traces.1 + lg.min(0.0) * traces.2
}

/// Minimum eigenvalue of each condition's matrix plus the trace error.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub trace_error: f64,
    pub min_eigenvalues: Vec<(Condition, f64)>,
}

impl FeasibilityReport {
    pub fn min_eigenvalue(&self, c: Condition) -> Option<f64> {
        self.min_eigenvalues.iter().find(|(k, _)| *k == c).map(|(_, v)| *v)
    }

    /// Smallest eigenvalue over all checked conditions.
    pub fn worst(&self) -> f64 {
        self.min_eigenvalues.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min)
    }
}

/// Diagnostic check of `rdm` against D2 and the requested conditions.
pub fn check_feasibility(rdm: &TwoRdm, conditions: ConditionSet) -> FeasibilityReport {
    let mut min_eigenvalues = vec![(Condition::D2, rdm.d.min_eigenvalue())];
    if conditions.q2 {
        min_eigenvalues.push((Condition::Q2, rdm.lift_q2().min_eigenvalue()));
    }
    if conditions.g2 {
        min_eigenvalues.push((Condition::G2, min_eigenvalue(&rdm.lift_g2())));
    }
    if conditions.t2 {
        min_eigenvalues.push((Condition::T2, min_eigenvalue(&t2_matrix(&rdm.d, rdm.n))));
    }
    FeasibilityReport { trace_error: rdm.trace_error(), min_eigenvalues }
}

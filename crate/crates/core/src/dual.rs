//! Dual-cone solver.
//!
//! Finds dual-cone matrices `B_i` and a per-pair shift `eps` with
//! `sum_i B_i = K - eps I`, maximizing `eps`. Any exact decomposition gives
//! `Tr(K D) >= eps N(N-1)/2` for every N-representable `D`, so
//! `eps N(N-1)/2` is a lower bound on the ground-state energy.
//!
//! Parameterization (all factors unconstrained):
//!
//! * Q2: `Qh^T(R R^T)` with `R` square on pair space;
//! * G2: `G^T(V V^T)` with `V` of size `r^2 x n_g`;
//! * T2: `sum_t B(c_t)` over `n_t2` coefficient vectors;
//! * D2: the remaining PSD slack, eliminated in closed form.
//!
//! The equality is enforced by an augmented Lagrangian with multiplier `X`
//! and penalty `mu`. Minimizing over the D2 slack gives the smooth objective
//!
//! ```text
//! f = -E + ||W||^2 / (2 mu) - ||X||^2 / (2 mu),   W = mu P+(A + X / mu),
//! A = Qh^T(R R^T) + G^T(V V^T) + sum_t B(c_t) - K + (E / np) I,
//! ```
//!
//! with `E = eps np` and `np = N(N-1)/2`, minimized by L-BFGS. After each
//! inner solve `X <- W`; at a stationary point `X` is the optimal 2-RDM.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hamiltonian::ReducedHamiltonian;
use crate::lbfgs::{minimize, LbfgsOptions};
use crate::nrep::{
    g2_adjoint, g2_linear, n_pairs, q2_linear, q2_pullback, t2_dual_element, t2_gram_adjoint, Condition, ConditionSet,
    DualConeElement, Provenance, T2FactorCoefficients, T2Kernel, TwoRdm,
};
use crate::pairspace::{PackedMatrix, PairBasis, Spectrum};
use crate::par;
use crate::report::{IterationRecord, SolveReport};

/// Eigenvalue below which a lifted multiplier counts as violating its
/// condition and triggers a factor update.
const ESCAPE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct DualProblem {
    pub ham: ReducedHamiltonian,
    /// Q2, G2 and T2 switch the corresponding dual families on.
    pub conditions: ConditionSet,
    pub n_g_factors: usize,
    pub n_t2_factors: usize,
    /// Target for `||sum B_i - (K - eps I)||_F`.
    pub tolerance: f64,
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    /// Outer iterations without a new best residual before giving up.
    pub stall_window: usize,
    pub seed: u64,
}

impl DualProblem {
    /// Defaults: `r` factors for each of G2 and T2 when enabled.
    pub fn new(ham: ReducedHamiltonian, conditions: ConditionSet) -> Self {
        let r = ham.r();
        Self {
            ham,
            conditions,
            n_g_factors: if conditions.g2 { r } else { 0 },
            n_t2_factors: if conditions.t2 { r } else { 0 },
            tolerance: 1e-7,
            max_outer_iterations: 60,
            max_inner_iterations: 20_000,
            stall_window: 6,
            seed: 0,
        }
    }
}

/// Decomposition certifying a lower bound.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    /// Per-pair shift; the bound before residual correction is `eps N(N-1)/2`.
    pub epsilon: f64,
    pub elements: Vec<DualConeElement>,
    /// `R = sum_i B_i - (K - eps I)`.
    pub residual_matrix: PackedMatrix,
    /// `||R||_F`.
    pub residual: f64,
}

impl DualCertificate {
    /// Recomputes `sum_i B_i - (K - eps I)` from the stored elements.
    pub fn recompute_residual(&self, k: &PackedMatrix) -> Result<PackedMatrix> {
        let basis = k.basis();
        let mut sum = PackedMatrix::zeros(basis);
        for e in &self.elements {
            sum = sum.add_scaled(&e.b, 1.0)?;
        }
        sum.add_scaled(k, -1.0)?.add_scaled(&PackedMatrix::identity(basis), self.epsilon)
    }
}

/// `eps * trace - max(0, lambda_max(R)) * trace`.
///
/// From `K - eps I = sum_i B_i - R`, every `D >= 0` with the given trace and
/// `Tr(B_i D) >= 0` has `Tr(K D) >= eps Tr D - lambda_max(R) Tr D`.
/// Surplus with `R <= 0` costs nothing.
pub fn rigorous_bound(certificate: &DualCertificate, trace: f64) -> f64 {
    let top = certificate.residual_matrix.eigendecompose().max();
    certificate.epsilon * trace - top.max(0.0) * trace
}

/// Lagrange multiplier of the fitting constraint; an approximate 2-RDM.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierRdm {
    pub x: PackedMatrix,
    pub n: usize,
}

impl MultiplierRdm {
    pub fn to_two_rdm(&self) -> TwoRdm {
        TwoRdm::new(self.x.clone(), self.n)
    }
}

/// Optimizer state, reusable as a warm start.
#[derive(Debug, Clone)]
pub struct DualState {
    theta: Vec<f64>,
    x: DMatrix<f64>,
    mu: f64,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub report: SolveReport,
    pub certificate: DualCertificate,
    pub multiplier: MultiplierRdm,
    pub state: DualState,
}

/// Offsets of the factor blocks inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    basis: PairBasis,
    n: usize,
    q: bool,
    ng: usize,
    nt: usize,
}

impl Layout {
    fn dim(&self) -> usize {
        self.basis.dim()
    }
    fn r(&self) -> usize {
        self.basis.r()
    }
    fn t2_len(&self) -> usize {
        self.dim() * self.r()
    }
    fn q_len(&self) -> usize {
        if self.q { self.dim() * self.dim() } else { 0 }
    }
    fn g_len(&self) -> usize {
        self.r() * self.r() * self.ng
    }
    fn len(&self) -> usize {
        1 + self.q_len() + self.g_len() + self.t2_len() * self.nt
    }

    fn split<'a>(&self, theta: &'a [f64]) -> (f64, &'a [f64], &'a [f64], &'a [f64]) {
        let (e, rest) = theta.split_at(1);
        let (q, rest) = rest.split_at(self.q_len());
        let (g, t) = rest.split_at(self.g_len());
        (e[0], q, g, t)
    }

    fn factors(&self, theta: &[f64]) -> Factors {
        let (e, q, g, t) = self.split(theta);
        let dim = self.dim();
        let r2 = self.r() * self.r();
        Factors {
            e,
            rq: DMatrix::from_column_slice(if self.q { dim } else { 0 }, if self.q { dim } else { 0 }, q),
            v: DMatrix::from_column_slice(r2, self.ng, g),
            c: DMatrix::from_column_slice(self.t2_len(), self.nt, t),
        }
    }

    fn pack(&self, f: &Factors) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.push(f.e);
        out.extend_from_slice(f.rq.as_slice());
        out.extend_from_slice(f.v.as_slice());
        out.extend_from_slice(f.c.as_slice());
        out
    }
}

#[derive(Debug, Clone)]
struct Factors {
    e: f64,
    rq: DMatrix<f64>,
    v: DMatrix<f64>,
    c: DMatrix<f64>,
}

/// Everything derived from one parameter vector at fixed `X`, `mu`.
struct Evaluation {
    f: f64,
    /// `mu P+(A + X/mu)`
    w: DMatrix<f64>,
    /// `sum_i B_i - (K - eps I)` including the eliminated D2 slack.
    residual: DMatrix<f64>,
}

struct Objective<'a> {
    layout: Layout,
    k: &'a DMatrix<f64>,
    x: &'a DMatrix<f64>,
    mu: f64,
}

impl Objective<'_> {
    fn np(&self) -> f64 {
        n_pairs(self.layout.n)
    }

    fn packed(&self, m: DMatrix<f64>) -> PackedMatrix {
        PackedMatrix::from_matrix_unchecked(self.layout.basis, m)
    }

    /// `A` without the D2 slack.
    fn fitted(&self, f: &Factors) -> DMatrix<f64> {
        let l = self.layout;
        let dim = l.dim();
        let n = l.n;
        let (q, (g, t)) = par::join(
            || l.q.then(|| q2_pullback(&self.packed(&f.rq * f.rq.transpose()), n).into_matrix()),
            || {
                par::join(
                    || (l.ng > 0).then(|| g2_adjoint(&(&f.v * f.v.transpose()), l.basis, n).into_matrix()),
                    || (l.nt > 0).then(|| t2_gram_adjoint(&f.c, l.basis, n).into_matrix()),
                )
            },
        );
        let mut a = DMatrix::identity(dim, dim) * (f.e / self.np()) - self.k;
        for part in [q, g, t].into_iter().flatten() {
            a += part;
        }
        a
    }

    fn evaluate(&self, f: &Factors) -> Evaluation {
        let a = self.fitted(f);
        let shifted = &a + self.x / self.mu;
        let eig = Spectrum::of_symmetric(&shifted);
        let plus = eig.reconstruct_with(|v| v.max(0.0));
        let minus = &plus - &shifted;
        let w = &plus * self.mu;
        let residual = &a + &minus;
        let value = -f.e + w.norm_squared() / (2.0 * self.mu) - self.x.norm_squared() / (2.0 * self.mu);
        Evaluation { f: value, w, residual }
    }

    fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let l = self.layout;
        let f = l.factors(theta);
        let ev = self.evaluate(&f);
        let w = &ev.w;
        let np = self.np();
        let wp = self.packed(w.clone());
        let tr = w.trace();
        let (gq, (gv, gc)) = par::join(
            || {
                l.q.then(|| {
                    let mut qh = q2_linear(&wp, l.n).into_matrix();
                    for i in 0..qh.nrows() {
                        qh[(i, i)] += tr / np;
                    }
                    qh * &f.rq * 2.0
                })
            },
            || {
                par::join(
                    || (l.ng > 0).then(|| g2_linear(&wp, l.n) * &f.v * 2.0),
                    || (l.nt > 0).then(|| T2Kernel::new(&wp, l.n).apply(&f.c) * 2.0),
                )
            },
        );
        let packed = l.pack(&Factors {
            e: -1.0 + tr / np,
            rq: gq.unwrap_or_else(|| DMatrix::zeros(0, 0)),
            v: gv.unwrap_or_else(|| DMatrix::zeros(l.r() * l.r(), 0)),
            c: gc.unwrap_or_else(|| DMatrix::zeros(l.t2_len(), 0)),
        });
        grad.copy_from_slice(&packed);
        ev.f
    }
}

fn random_block(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        0.01 * z
    })
}

fn layout_of(problem: &DualProblem) -> Layout {
    Layout {
        basis: problem.ham.basis(),
        n: problem.ham.n,
        q: problem.conditions.q2,
        ng: if problem.conditions.g2 { problem.n_g_factors } else { 0 },
        nt: if problem.conditions.t2 { problem.n_t2_factors } else { 0 },
    }
}

fn initial_state(problem: &DualProblem, layout: Layout) -> DualState {
    let dim = layout.dim();
    let r2 = layout.r() * layout.r();
    let np = n_pairs(layout.n);
    // One stream per block, so block sizes cannot shift each other's draws.
    let stream = |s: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
        rng.set_stream(s);
        rng
    };
    let qd = if layout.q { dim } else { 0 };
    let factors = Factors {
        e: problem.ham.k.min_eigenvalue() * np,
        rq: random_block(qd, qd, &mut stream(1)),
        v: random_block(r2, layout.ng, &mut stream(2)),
        c: random_block(layout.t2_len(), layout.nt, &mut stream(3)),
    };
    DualState { theta: layout.pack(&factors), x: DMatrix::identity(dim, dim) * (np / dim as f64), mu: 1.0 }
}

/// Replaces the weakest factor of each family whose lifted multiplier has a
/// negative eigenvalue with the offending eigenvector. Returns whether any
/// factor changed.
fn escape(layout: Layout, factors: &mut Factors, w: &DMatrix<f64>) -> bool {
    let np = n_pairs(layout.n);
    let wp = PackedMatrix::from_matrix_unchecked(layout.basis, w.clone());
    let tr = w.trace();
    let lowest = |m: DMatrix<f64>| -> (f64, DVector<f64>) {
        let s = Spectrum::of_symmetric(&m);
        let k = s.len() - 1;
        (s.eigenvalues[k], s.eigenvectors.column(k).into_owned())
    };
    let weakest = |m: &DMatrix<f64>| -> usize {
        (0..m.ncols())
            .min_by(|&a, &b| m.column(a).norm().total_cmp(&m.column(b).norm()))
            .unwrap_or(0)
    };
    let (q, (g, t)) = par::join(
        || {
            layout.q.then(|| {
                let mut qh = q2_linear(&wp, layout.n).into_matrix();
                for i in 0..qh.nrows() {
                    qh[(i, i)] += tr / np;
                }
                lowest(qh)
            })
        },
        || {
            par::join(
                || (layout.ng > 0).then(|| lowest(g2_linear(&wp, layout.n))),
                || (layout.nt > 0).then(|| lowest(T2Kernel::new(&wp, layout.n).matrix())),
            )
        },
    );
    let mut changed = false;
    for (found, m) in [(q, &mut factors.rq), (g, &mut factors.v), (t, &mut factors.c)] {
        if let Some((lam, u)) = found {
            if lam < -ESCAPE_TOL && m.ncols() > 0 {
                let k = weakest(m);
                m.set_column(k, &(u * (0.5 * (-lam).sqrt())));
                changed = true;
            }
        }
    }
    changed
}

/// Solves the dual problem from a seeded random start.
pub fn solve_dual(problem: &DualProblem) -> Result<DualSolution> {
    let layout = layout_of(problem);
    solve_dual_from(problem, &initial_state(problem, layout))
}

/// Solves the dual problem starting from `warm` (for example the state of a
/// nearby solve).
pub fn solve_dual_from(problem: &DualProblem, warm: &DualState) -> Result<DualSolution> {
    let start = Instant::now();
    let ham = &problem.ham;
    let layout = layout_of(problem);
    let (n, r) = (ham.n, layout.r());
    if n < 2 || n > r {
        return Err(Error::InvalidInput(format!("{n} particles in {r} spin orbitals")));
    }
    if warm.theta.len() != layout.len() || warm.x.nrows() != layout.dim() {
        return Err(Error::DimensionMismatch { expected: layout.len(), found: warm.theta.len() });
    }
    let np = n_pairs(n);
    let k = ham.k.matrix().clone();
    let k_norm = k.norm();
    let opts = LbfgsOptions {
        memory: 30,
        max_iter: problem.max_inner_iterations,
        grad_tol: 1e-11,
        f_rel_tol: 1e-16,
        ..LbfgsOptions::default()
    };

    let mut state = warm.clone();
    let mut history = Vec::new();
    let mut best_bound = f64::NEG_INFINITY;
    let mut best_residual = f64::INFINITY;
    let mut since_best = 0;
    let mut prev_residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut grad_inf = f64::INFINITY;
    let mut residual = DMatrix::zeros(layout.dim(), layout.dim());

    for outer in 1..=problem.max_outer_iterations.max(1) {
        iterations = outer;
        let obj = Objective { layout, k: &k, x: &state.x, mu: state.mu };
        let res = minimize(|t, g| obj.value_and_gradient(t, g), state.theta.clone(), &opts).map_err(|e| match e {
            Error::Numerical { iteration, message } => Error::Numerical {
                iteration,
                message: format!("outer iteration {outer}: {message}"),
            },
            other => other,
        })?;
        grad_inf = res.grad_inf;
        state.theta = res.x;
        let mut factors = layout.factors(&state.theta);
        let ev = obj.evaluate(&factors);
        residual = ev.residual;
        let rnorm = residual.norm();
        let top = Spectrum::of_symmetric(&residual).max();
        let bound = factors.e - top.max(0.0) * np;
        best_bound = best_bound.max(bound);
        state.x = ev.w;
        history.push(IterationRecord {
            iteration: outer,
            energy: factors.e + ham.core_energy,
            lower_bound: best_bound + ham.core_energy,
            residual: rnorm,
        });
        if rnorm <= problem.tolerance {
            converged = true;
            break;
        }
        if rnorm < best_residual {
            best_residual = rnorm;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= problem.stall_window {
                break;
            }
        }
        if escape(layout, &mut factors, &state.x) {
            state.theta = layout.pack(&factors);
        }
        if rnorm > 0.25 * prev_residual {
            state.mu *= 4.0;
        }
        prev_residual = rnorm;
    }

    let factors = layout.factors(&state.theta);
    let epsilon = factors.e / np;
    let certificate = build_certificate(layout, &factors, &state, &k, epsilon)?;
    let rnorm = residual.norm();
    let energy = factors.e + ham.core_energy;
    let lower_bound = best_bound + ham.core_energy;
    let multiplier = MultiplierRdm { x: PackedMatrix::from_matrix_unchecked(layout.basis, state.x.clone()), n };
    let trace_error = (state.x.trace() - np).abs() / np;
    // A small residual with a multiplier far off the trace shell means the
    // inner problem stalled rather than converged.
    let converged = converged && trace_error <= problem.tolerance.sqrt();
    let report = SolveReport {
        energy,
        rdm: multiplier.to_two_rdm(),
        residual_primal: rnorm / (1.0 + k_norm),
        residual_dual: trace_error.max(grad_inf),
        residual_gap: (energy - lower_bound).max(0.0),
        lower_bound,
        iterations,
        converged,
        wall_time: start.elapsed(),
        history,
    };
    Ok(DualSolution { report, certificate, multiplier, state })
}

fn build_certificate(
    layout: Layout,
    f: &Factors,
    state: &DualState,
    k: &DMatrix<f64>,
    epsilon: f64,
) -> Result<DualCertificate> {
    let basis = layout.basis;
    let n = layout.n;
    let packed = |m: DMatrix<f64>| PackedMatrix::from_matrix_unchecked(basis, m);
    let mut elements = Vec::new();
    if layout.q {
        elements.push(DualConeElement {
            b: q2_pullback(&packed(&f.rq * f.rq.transpose()), n),
            condition: Condition::Q2,
            provenance: Provenance::Factor(f.rq.clone()),
        });
    }
    let r2 = layout.r() * layout.r();
    for v in f.v.column_iter() {
        let v = v.into_owned();
        elements.push(DualConeElement {
            b: g2_adjoint(&(&v * v.transpose()), basis, n),
            condition: Condition::G2,
            provenance: Provenance::Eigenvector(v),
        });
    }
    debug_assert_eq!(f.v.nrows(), r2);
    for c in f.c.column_iter() {
        let coeffs = T2FactorCoefficients::new(layout.r(), c.iter().copied().collect())?;
        elements.push(t2_dual_element(&coeffs, n)?);
    }
    // D2 slack: the negative part of A + X/mu at the final iterate.
    let mut fitted = DMatrix::identity(layout.dim(), layout.dim()) * epsilon - k;
    for e in &elements {
        fitted += e.b.matrix();
    }
    let shifted = &fitted + &state.x / state.mu;
    let eig = Spectrum::of_symmetric(&shifted);
    let negative: Vec<usize> = (0..eig.len()).filter(|&i| eig.eigenvalues[i] < 0.0).collect();
    let mut slack_factor = DMatrix::zeros(layout.dim(), negative.len());
    for (dst, &i) in negative.iter().enumerate() {
        slack_factor.set_column(dst, &(eig.eigenvectors.column(i) * (-eig.eigenvalues[i]).sqrt()));
    }
    let slack = &slack_factor * slack_factor.transpose();
    elements.push(DualConeElement { b: packed(slack), condition: Condition::D2, provenance: Provenance::Factor(slack_factor) });
    let mut cert = DualCertificate {
        epsilon,
        elements,
        residual_matrix: PackedMatrix::zeros(basis),
        residual: 0.0,
    };
    let residual = cert.recompute_residual(&packed(k.clone()))?;
    cert.residual = residual.frobenius_norm();
    cert.residual_matrix = residual;
    Ok(cert)
}

/// Finite-difference check of `dE*/dK = X*` along one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HellmannFeynman {
    /// `(E*(K + h Delta) - E*(K - h Delta)) / (2h)`.
    pub central_difference: f64,
    /// `Tr(Delta X*)`.
    pub predicted: f64,
    pub discrepancy: f64,
    /// Both displaced solves converged.
    pub converged: bool,
}

/// Solves at `K`, then at `K +- step Delta` for every direction (warm-started
/// from the base solution, directions in parallel), and compares the central
/// difference of the optimal energy with `Tr(Delta X*)`.
pub fn hellmann_feynman_check(
    problem: &DualProblem,
    directions: &[PackedMatrix],
    step: f64,
) -> Result<(DualSolution, Vec<HellmannFeynman>)> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!("step must be positive, got {step}")));
    }
    let base = solve_dual(problem)?;
    let x = &base.multiplier.x;
    let displaced = |delta: &PackedMatrix, sign: f64| -> Result<DualSolution> {
        let k = problem.ham.k.add_scaled(delta, sign * step)?;
        let p = DualProblem { ham: problem.ham.with_k(k), ..problem.clone() };
        solve_dual_from(&p, &base.state)
    };
    let results = par::map(directions, |delta| -> Result<HellmannFeynman> {
        let predicted = delta.inner(x)?;
        if delta.frobenius_norm() == 0.0 {
            return Ok(HellmannFeynman { central_difference: 0.0, predicted, discrepancy: predicted.abs(), converged: true });
        }
        let (plus, minus) = par::join(|| displaced(delta, 1.0), || displaced(delta, -1.0));
        let (plus, minus) = (plus?, minus?);
        let cd = (plus.report.energy - minus.report.energy) / (2.0 * step);
        Ok(HellmannFeynman {
            central_difference: cd,
            predicted,
            discrepancy: (cd - predicted).abs(),
            converged: plus.report.converged && minus.report.converged,
        })
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((base, results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{assemble_reduced_hamiltonian, hubbard_chain};

    fn hubbard(l: usize, u: f64) -> ReducedHamiltonian {
        assemble_reduced_hamiltonian(&hubbard_chain(l, 1.0, u, false).unwrap(), l).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ham = hubbard(3, 2.0);
        let mut p = DualProblem::new(ham, ConditionSet::DQGT);
        p.n_g_factors = 2;
        p.n_t2_factors = 2;
        let layout = layout_of(&p);
        let mut state = initial_state(&p, layout);
        // Move away from the tiny initial factors so every term is active.
        state.theta.iter_mut().skip(1).enumerate().for_each(|(i, v)| *v = *v * 10.0 + 0.005 * ((i % 7) as f64 - 3.0));
        let dim = layout.dim();
        let x = DMatrix::from_fn(dim, dim, |i, j| if i == j { 0.2 } else { 0.01 * ((i + j) % 3) as f64 });
        let k = p.ham.k.matrix().clone();
        let obj = Objective { layout, k: &k, x: &x, mu: 0.7 };
        let mut g = vec![0.0; layout.len()];
        obj.value_and_gradient(&state.theta, &mut g);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut scratch = vec![0.0; layout.len()];
        for idx in (0..layout.len()).step_by(layout.len() / 40 + 1).chain([0, 1, layout.len() - 1]) {
            let mut tp = state.theta.clone();
            tp[idx] += h;
            let fp = obj.value_and_gradient(&tp, &mut scratch);
            tp[idx] -= 2.0 * h;
            let fm = obj.value_and_gradient(&tp, &mut scratch);
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((fd - g[idx]).abs() / g[idx].abs().max(1.0));
        }
        assert!(worst < 1e-6, "gradient error {worst}");
    }

    #[test]
    fn bound_corrections() {
        let basis = PairBasis::new(4);
        let mk = |r: PackedMatrix| DualCertificate { epsilon: -1.5, elements: vec![], residual: r.frobenius_norm(), residual_matrix: r };
        let zero = mk(PackedMatrix::zeros(basis));
        assert_eq!(rigorous_bound(&zero, 3.0), -4.5);
        // Surplus on the cone side: sum B = K - eps I - delta I.
        let surplus = mk(PackedMatrix::identity(basis).scaled(-0.1));
        assert_eq!(rigorous_bound(&surplus, 3.0), -4.5);
        let deficit = mk(PackedMatrix::identity(basis).scaled(0.1));
        assert!((rigorous_bound(&deficit, 3.0) + 4.8).abs() < 1e-12);
    }

    #[test]
    fn dimer_is_exact_with_dq_factors() {
        let mut p = DualProblem::new(hubbard(2, 4.0), ConditionSet::DQ);
        p.tolerance = 1e-8;
        let sol = solve_dual(&p).unwrap();
        assert!(sol.report.converged, "{:?}", sol.report.history);
        assert!((sol.report.energy + 0.828427124746).abs() < 1e-5, "{}", sol.report.energy);
        let cert_res = sol.certificate.recompute_residual(&p.ham.k).unwrap();
        assert!(cert_res.frobenius_norm() < 1e-6);
    }
}

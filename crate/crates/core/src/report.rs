use std::time::Duration;

use crate::nrep::TwoRdm;

/// One logged iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Total energy of the current iterate.
    pub energy: f64,
    /// Certified lower bound (total energy) available at this iterate.
    pub lower_bound: f64,
    /// Largest of the residual measures at this iterate.
    pub residual: f64,
}

/// Outcome of a primal or dual solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Total energy, `Tr(K D) + core` for the primal solver and
    /// `eps N(N-1)/2 + core` for the dual solver.
    pub energy: f64,
    /// Primal 2-RDM, or the Lagrange multiplier for the dual solver.
    pub rdm: TwoRdm,
    /// Relative residual of the linear constraints.
    pub residual_primal: f64,
    /// Relative residual of the dual constraint.
    pub residual_dual: f64,
    /// Absolute slack such that `energy - residual_gap` is a certified lower
    /// bound on the optimum of the relaxation (hence on the exact energy).
    pub residual_gap: f64,
    /// `energy - residual_gap`.
    pub lower_bound: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: Duration,
    pub history: Vec<IterationRecord>,
}

//! Lower-bound ground-state energies of many-fermion Hamiltonians from the
//! two-electron reduced density matrix.
//!
//! Two solvers share one set of N-representability maps:
//!
//! * [`primal`] minimizes `Tr(K D)` over 2-RDMs whose D2, Q2 and G2 metric
//!   matrices are positive semidefinite (boundary-point iteration).
//! * [`dual`] fits a sum of dual-cone matrices (D2, Q2, G2 and T2) to the
//!   shifted reduced Hamiltonian `K - eps I`, maximizes `eps`, and reads the
//!   2-RDM off as the Lagrange multiplier of the fitting constraint.
//!
//! [`fci`] is a brute-force determinant-space oracle used to check both.
//!
//! Packed storage convention: for `i < j`, `k < l` the element
//! `D[(ij),(kl)]` equals `<a+_i a+_j a_l a_k>`, so `Tr D = N(N-1)/2`. Spatial
//! orbital `p` maps to spin orbitals `2p` (alpha) and `2p + 1` (beta).

pub mod checks;
pub mod dual;
pub mod error;
pub mod fci;
pub mod hamiltonian;
pub mod lbfgs;
pub mod nrep;
pub mod pairspace;
pub mod par;
pub mod primal;
pub mod properties;
pub mod report;

pub use error::{Error, Result};
pub use hamiltonian::{IntegralSet, ReducedHamiltonian};
pub use report::{IterationRecord, SolveReport};
pub use nrep::{Condition, ConditionSet, OneRdm, TwoRdm};
pub use pairspace::{PackedMatrix, PairBasis, Spectrum};

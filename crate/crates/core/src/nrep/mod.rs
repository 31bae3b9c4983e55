//! N-representability maps: contraction to the 1-RDM, the Q2/G2 lifts and
//! their adjoints, T2 dual-cone matrices, and dual-cone elements built from
//! positive semidefinite factors.

mod elements;
mod lifts;
mod t2;

pub use elements::{dq_dual_elements, q2_pullback, ConeFactor, DualConeElement, Provenance};
pub use lifts::{
    contract, contract_adjoint, g2_adjoint, g2_linear, pack_adjoint, q2_linear, q2_linear_adjoint,
    FullTensor,
};
pub use t2::{t2_apply, t2_dual_element, t2_gram_adjoint, t2_matrix, T2FactorCoefficients, T2Kernel};

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairspace::{PackedMatrix, PairBasis};

/// Trace tolerance beyond which a 2-RDM is rejected as non-normalized.
pub const TRACE_GUARD: f64 = 1e-3;

/// Two-particle reduced density matrix in packed storage.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoRdm {
    pub d: PackedMatrix,
    pub n: usize,
}

impl TwoRdm {
    pub fn new(d: PackedMatrix, n: usize) -> Self {
        Self { d, n }
    }

    pub fn basis(&self) -> PairBasis {
        self.d.basis()
    }

    /// `N(N-1)/2`.
    pub fn n_pairs(&self) -> f64 {
        n_pairs(self.n)
    }

    pub fn trace_error(&self) -> f64 {
        self.d.trace() - self.n_pairs()
    }

    fn check_normalized(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidInput(format!(
                "contraction needs at least 2 particles, got {}",
                self.n
            )));
        }
        if self.trace_error().abs() > TRACE_GUARD * self.n_pairs().max(1.0) {
            return Err(Error::NonNormalized { trace: self.d.trace(), expected: self.n_pairs() });
        }
        Ok(())
    }

    /// `gamma_ik = sum_j <a+_i a+_j a_j a_k> / (N-1)`.
    pub fn contract_to_1rdm(&self) -> Result<OneRdm> {
        self.check_normalized()?;
        Ok(OneRdm { gamma: contract(&self.d, self.n), n: self.n })
    }

    /// Two-hole matrix `<a_i a_j a+_l a+_k>` in packed storage.
    pub fn lift_q2(&self) -> PackedMatrix {
        let q = q2_linear(&self.d, self.n);
        q.add_scaled(&PackedMatrix::identity(self.basis()), 1.0).expect("same basis")
    }

    /// Particle-hole matrix `G[(ij),(kl)] = d_jl gamma_ik - <a+_i a+_l a_j a_k>`
    /// over ordered pairs, row index `i * r + j`.
    pub fn lift_g2(&self) -> DMatrix<f64> {
        g2_linear(&self.d, self.n)
    }

    /// Dense `T2(D)` quadratic form over the coefficient space, so that
    /// `Tr(B(c) D) = c^T T2(D) c`.
    pub fn lift_t2(&self) -> DMatrix<f64> {
        t2_matrix(&self.d, self.n)
    }
}

pub(crate) fn n_pairs(n: usize) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// One-particle reduced density matrix over spin orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct OneRdm {
    pub gamma: DMatrix<f64>,
    pub n: usize,
}

impl OneRdm {
    pub fn r(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.gamma.trace()
    }

    /// Spatial-orbital density `gamma[2p][2q] + gamma[2p+1][2q+1]`.
    pub fn spin_summed(&self) -> DMatrix<f64> {
        let m = self.r() / 2;
        DMatrix::from_fn(m, m, |p, q| {
            self.gamma[(2 * p, 2 * q)] + self.gamma[(2 * p + 1, 2 * q + 1)]
        })
    }
}

/// One N-representability condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    D2,
    Q2,
    G2,
    T2,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::D2 => "D2",
            Condition::Q2 => "Q2",
            Condition::G2 => "G2",
            Condition::T2 => "T2",
        })
    }
}

/// A set of conditions; D2 is always present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConditionSet {
    pub q2: bool,
    pub g2: bool,
    pub t2: bool,
}

impl ConditionSet {
    pub const D: Self = Self { q2: false, g2: false, t2: false };
    pub const DQ: Self = Self { q2: true, g2: false, t2: false };
    pub const DQG: Self = Self { q2: true, g2: true, t2: false };
    pub const DQGT: Self = Self { q2: true, g2: true, t2: true };

    pub fn contains(&self, c: Condition) -> bool {
        match c {
            Condition::D2 => true,
            Condition::Q2 => self.q2,
            Condition::G2 => self.g2,
            Condition::T2 => self.t2,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Condition> + '_ {
        [Condition::D2, Condition::Q2, Condition::G2, Condition::T2]
            .into_iter()
            .filter(|c| self.contains(*c))
    }
}

impl fmt::Display for ConditionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("d")?;
        for (on, tag) in [(self.q2, "q"), (self.g2, "g"), (self.t2, "t")] {
            if on {
                f.write_str(tag)?;
            }
        }
        Ok(())
    }
}

impl FromStr for ConditionSet {
    type Err = Error;

    /// Letters `d`, `q`, `g`, `t` in any order and case, e.g. `dqg`.
    fn from_str(s: &str) -> Result<Self> {
        let mut set = Self::D;
        for ch in s.trim().chars() {
            match ch.to_ascii_lowercase() {
                'd' => {}
                'q' => set.q2 = true,
                'g' => set.g2 = true,
                't' => set.t2 = true,
                other => {
                    return Err(Error::InvalidInput(format!("unknown condition letter {other:?} in {s:?}")))
                }
            }
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_set_parsing() {
        assert_eq!("dqg".parse::<ConditionSet>().unwrap(), ConditionSet::DQG);
        assert_eq!("DQGT".parse::<ConditionSet>().unwrap(), ConditionSet::DQGT);
        assert_eq!(ConditionSet::DQ.to_string(), "dq");
        assert!("dqx".parse::<ConditionSet>().is_err());
        let listed: Vec<_> = ConditionSet::DQG.iter().collect();
        assert_eq!(listed, vec![Condition::D2, Condition::Q2, Condition::G2]);
    }

    #[test]
    fn determinant_contracts_to_occupations() {
        let basis = PairBasis::new(4);
        let mut d = PackedMatrix::zeros(basis);
        d.set(0, 0, 1.0);
        let rdm = TwoRdm::new(d, 2);
        let g = rdm.contract_to_1rdm().unwrap();
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]));
        assert!((g.gamma - expect).amax() < 1e-15);
    }

    #[test]
    fn contraction_rejects_wrong_trace() {
        let basis = PairBasis::new(4);
        let rdm = TwoRdm::new(PackedMatrix::identity(basis), 2);
        assert!(matches!(rdm.contract_to_1rdm(), Err(Error::NonNormalized { .. })));
    }
}

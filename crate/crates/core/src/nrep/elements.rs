use nalgebra::{DMatrix, DVector};

use super::lifts::{g2_adjoint, q2_linear_adjoint};
use super::{n_pairs, Condition, T2FactorCoefficients};
use crate::error::{Error, Result};
use crate::pairspace::{min_eigenvalue, PackedMatrix, PairBasis};

/// Relative eigenvalue floor below which a factor is rejected as not PSD.
const PSD_TOL: f64 = 1e-10;

/// What generated a dual-cone element.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// Rank-one factor `v v^T` in the space of the condition.
    Eigenvector(DVector<f64>),
    /// General positive semidefinite factor in the space of the condition.
    Factor(DMatrix<f64>),
    T2(T2FactorCoefficients),
}

/// A two-particle matrix `B` with `Tr(B D) >= 0` for every N-representable `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualConeElement {
    pub b: PackedMatrix,
    pub condition: Condition,
    pub provenance: Provenance,
}

/// A positive semidefinite factor living in the space of one condition.
#[derive(Debug, Clone)]
pub enum ConeFactor {
    /// `v v^T` on pair space.
    D2(DVector<f64>),
    /// PSD matrix on pair space, pulled back through the Q2 map.
    Q2(DMatrix<f64>),
    /// PSD matrix on ordered pairs (`r^2`), pulled back through the G2 map.
    G2(DMatrix<f64>),
}

fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 {
        return Ok(());
    }
    let scale = m.amax().max(1.0);
    let asym = crate::pairspace::asymmetry(m);
    if asym > crate::pairspace::SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let lo = min_eigenvalue(m);
    if lo < -PSD_TOL * scale {
        return Err(Error::NotPsd(lo));
    }
    Ok(())
}

/// Adjoint of the homogeneous two-hole map: the Q2 constant term is written
/// as `Tr(D)/(N(N-1)/2) * I`, so the pullback of `Y` is
/// `Q2lin^T(Y) + Tr(Y) I / (N(N-1)/2)`.
pub fn q2_pullback(y: &PackedMatrix, n: usize) -> PackedMatrix {
    let basis = y.basis();
    let shift = y.trace() / n_pairs(n);
    q2_linear_adjoint(y, n)
        .add_scaled(&PackedMatrix::identity(basis), shift)
        .expect("same basis")
}

/// Dual-cone elements for D2, Q2 and G2 factors. `Tr(B D)` equals the
/// factor's inner product with the lifted matrix for every `D` of trace
/// `N(N-1)/2`.
pub fn dq_dual_elements(factors: &[ConeFactor], basis: PairBasis, n: usize) -> Result<Vec<DualConeElement>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("dual elements need N >= 2, got {n}")));
    }
    let dim = basis.dim();
    let r = basis.r();
    factors
        .iter()
        .map(|f| match f {
            ConeFactor::D2(v) => {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
                }
                Ok(DualConeElement {
                    b: PackedMatrix::from_matrix_unchecked(basis, v * v.transpose()),
                    condition: Condition::D2,
                    provenance: Provenance::Eigenvector(v.clone()),
                })
            }
            ConeFactor::Q2(y) => {
                if y.nrows() != dim || y.ncols() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: y.nrows() });
                }
                check_psd(y)?;
                let yp = PackedMatrix::from_matrix_unchecked(basis, y.clone());
                Ok(DualConeElement {
                    b: q2_pullback(&yp, n),
                    condition: Condition::Q2,
                    provenance: Provenance::Factor(y.clone()),
                })
            }
            ConeFactor::G2(y) => {
                if y.nrows() != r * r || y.ncols() != r * r {
                    return Err(Error::DimensionMismatch { expected: r * r, found: y.nrows() });
                }
                check_psd(y)?;
                Ok(DualConeElement {
                    b: g2_adjoint(y, basis, n),
                    condition: Condition::G2,
                    provenance: Provenance::Factor(y.clone()),
                })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d2_factor_is_outer_product() {
        let basis = PairBasis::new(4);
        let v = DVector::from_vec(vec![1.0, 2.0, 0.0, 0.0, -1.0, 0.5]);
        let el = dq_dual_elements(&[ConeFactor::D2(v.clone())], basis, 2).unwrap();
        assert_eq!(el[0].b.matrix(), &(&v * v.transpose()));
    }

    #[test]
    fn rejects_indefinite_factor() {
        let basis = PairBasis::new(4);
        let mut y = DMatrix::identity(6, 6);
        y[(0, 0)] = -1.0;
        let out = dq_dual_elements(&[ConeFactor::Q2(y)], basis, 2);
        assert!(matches!(out, Err(Error::NotPsd(_))));
    }
}

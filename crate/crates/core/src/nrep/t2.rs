//! T2 condition through its dual-cone matrices.
//!
//! A factor operator `C = sum_{jkl} c_jkl a+_j a+_k a_l` (sum over all `j, k`,
//! with `c_kjl = -c_jkl`) gives the positive operator `C C+ + C+ C`, whose
//! expectation value is linear in the 2-RDM: `<C C+ + C+ C> = Tr(B(c) D)`.
//! Coefficients are stored for `j < k` only, at flat index `pair(j,k) * r + l`.
//!
//! The same identity read the other way defines the quadratic form
//! `c^T T2(D) c = Tr(B(c) D)`; [`T2Kernel`] applies `T2(D)` without forming
//! it, and [`t2_gram_adjoint`] sums `B(c_t)` over a batch of factors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lifts::{contract, contract_adjoint, pack_adjoint, FullTensor};
use super::{Condition, DualConeElement, Provenance};
use crate::error::{Error, Result};
use crate::pairspace::{PackedMatrix, PairBasis};
use crate::par;

/// Coefficients `c_jkl` of one T2 factor operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2FactorCoefficients {
    r: usize,
    c: Vec<f64>,
}

impl T2FactorCoefficients {
    /// Length of the coefficient vector for `r` spin orbitals.
    pub fn len_for(r: usize) -> usize {
        PairBasis::new(r).dim() * r
    }

    pub fn new(r: usize, c: Vec<f64>) -> Result<Self> {
        let expected = Self::len_for(r);
        if c.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: c.len() });
        }
        Ok(Self { r, c })
    }

    /// Scales `c` to unit Frobenius norm.
    pub fn normalized(r: usize, c: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(r, c)?;
        let norm = out.norm();
        if norm == 0.0 {
            return Err(Error::InvalidInput("cannot normalize zero T2 coefficients".into()));
        }
        out.c.iter_mut().for_each(|x| *x /= norm);
        Ok(out)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c
    }

    pub fn norm(&self) -> f64 {
        self.c.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `c_jkl` for any `j, k`; zero when `j == k`.
    pub fn get(&self, j: usize, k: usize, l: usize) -> f64 {
        match PairBasis::new(self.r).lookup(j, k) {
            Some((a, s)) => s * self.c[a * self.r + l],
            None => 0.0,
        }
    }
}

/// `T2(D)` with the pieces that depend only on `D` precomputed.
pub struct T2Kernel {
    basis: PairBasis,
    d: DMatrix<f64>,
    gamma: DMatrix<f64>,
    /// `f[(l*r+s), (q*r+m)] = D[l][q][m][s]`.
    f: DMatrix<f64>,
}

impl T2Kernel {
    pub fn new(d: &PackedMatrix, n: usize) -> Self {
        let basis = d.basis();
        let r = basis.r();
        let full = FullTensor::from_packed(d);
        let mut f = DMatrix::zeros(r * r, r * r);
        for l in 0..r {
            for q in 0..r {
                for m in 0..r {
                    for s in 0..r {
                        f[(l * r + s, q * r + m)] = full.get(l, q, m, s);
                    }
                }
            }
        }
        Self { basis, d: d.matrix().clone(), gamma: contract(d, n), f }
    }

    /// Dimension of the coefficient space, `r * r(r-1)/2`.
    pub fn dim(&self) -> usize {
        self.basis.dim() * self.basis.r()
    }

    /// `T2(D) * cols` for a block of coefficient columns.
    pub fn apply(&self, cols: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.dim();
        assert_eq!(cols.nrows(), m, "coefficient length mismatch");
        let k = cols.ncols();
        if k == 0 {
            return DMatrix::zeros(m, 0);
        }
        // Column blocks are independent; results are concatenated in order.
        let blocks = par::fixed_chunks(k, 16, |range| self.apply_block(&cols.columns(range.start, range.len()).into_owned()));
        let mut out = DMatrix::zeros(m, k);
        let mut at = 0;
        for b in blocks {
            out.columns_mut(at, b.ncols()).copy_from(&b);
            at += b.ncols();
        }
        out
    }

    fn apply_block(&self, cols: &DMatrix<f64>) -> DMatrix<f64> {
        let r = self.basis.r();
        let dim = self.basis.dim();
        let k = cols.ncols();
        let pairs: Vec<_> = self.basis.pairs().collect();
        let mut cf = DMatrix::zeros(k * r, r * r);
        for t in 0..k {
            for (a, &(x, q)) in pairs.iter().enumerate() {
                for l in 0..r {
                    let v = cols[(a * r + l, t)];
                    cf[(t * r + x, q * r + l)] = v;
                    cf[(t * r + q, x * r + l)] = -v;
                }
            }
        }
        let y = cf * self.f.transpose();
        let mut out = DMatrix::zeros(dim * r, k);
        for t in 0..k {
            let cm = DMatrix::from_fn(dim, r, |a, l| cols[(a * r + l, t)]);
            let dense = (&self.d * &cm + &cm * &self.gamma) * 4.0;
            for (a, &(i, j)) in pairs.iter().enumerate() {
                for l in 0..r {
                    let exch = y[(t * r + i, l * r + j)] - y[(t * r + j, l * r + i)];
                    out[(a * r + l, t)] = dense[(a, l)] - 4.0 * exch;
                }
            }
        }
        out
    }

    /// Dense symmetric `T2(D)`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let m = self.dim();
        let mut out = self.apply(&DMatrix::identity(m, m));
        crate::pairspace::symmetrize(&mut out);
        out
    }
}

/// `T2(D) * cols`.
pub fn t2_apply(d: &PackedMatrix, n: usize, cols: &DMatrix<f64>) -> DMatrix<f64> {
    T2Kernel::new(d, n).apply(cols)
}

/// Dense `T2(D)` of size `r^2 (r-1)/2`.
pub fn t2_matrix(d: &PackedMatrix, n: usize) -> DMatrix<f64> {
    T2Kernel::new(d, n).matrix()
}

/// `sum_t B(c_t)` for the factor columns `c_t` of `cols`; equivalently the
/// adjoint of `T2` applied to `cols * cols^T`.
pub fn t2_gram_adjoint(cols: &DMatrix<f64>, basis: PairBasis, n: usize) -> PackedMatrix {
    let r = basis.r();
    let dim = basis.dim();
    let k = cols.ncols();
    let pairs: Vec<_> = basis.pairs().collect();
    let mut direct = DMatrix::zeros(dim, dim);
    let mut one_body = DMatrix::zeros(r, r);
    // phi[(t*r + j), (s*r + p)] = c_t[j][s][p]
    let mut phi = DMatrix::zeros(k * r, r * r);
    for t in 0..k {
        let cm = DMatrix::from_fn(dim, r, |a, l| cols[(a * r + l, t)]);
        direct += &cm * cm.transpose();
        one_body += cm.transpose() * &cm;
        for (a, &(j, s)) in pairs.iter().enumerate() {
            for p in 0..r {
                let v = cm[(a, p)];
                phi[(t * r + j, s * r + p)] = v;
                phi[(t * r + s, j * r + p)] = -v;
            }
        }
    }
    let gram = phi.transpose() * &phi;
    let mut z = FullTensor::zeros(r);
    for p in 0..r {
        for q in 0..r {
            for rr in 0..r {
                for s in 0..r {
                    z.set(p, q, rr, s, -4.0 * gram[(s * r + p, q * r + rr)]);
                }
            }
        }
    }
    let exchange = pack_adjoint(&z, basis);
    let mut m = direct * 4.0 + exchange.matrix();
    m += contract_adjoint(&(one_body * 4.0), basis, n).matrix();
    PackedMatrix::from_matrix_unchecked(basis, m)
}

/// The dual-cone matrix of one T2 factor, written out term by term.
///
/// With `c'_pjk = c_jkp` (annihilated index first) and the antisymmetrizer
/// `A f(j,k,l,m) = f(jklm) - f(kjlm) - f(jkml) + f(kjml)`:
///
/// `B[(jk),(lm)] = A sum_p (c'_pjk c'_plm + 4 c'_lkp c'_jpm)
///               + 2/(N-1) A d_km sum_pq c'_lpq c'_jpq`.
///
/// The prefactors are those of the packed trace; a trace over all ordered
/// index pairs carries an extra 1/4.
pub fn t2_dual_element(c: &T2FactorCoefficients, n: usize) -> Result<DualConeElement> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("T2 element needs N >= 2, got {n}")));
    }
    let r = c.r();
    let basis = PairBasis::new(r);
    let mut cp = vec![0.0; r * r * r];
    for p in 0..r {
        for j in 0..r {
            for k in 0..r {
                cp[(p * r + j) * r + k] = c.get(j, k, p);
            }
        }
    }
    let at = |p: usize, j: usize, k: usize| cp[(p * r + j) * r + k];
    let mut s = DMatrix::zeros(r, r);
    for l in 0..r {
        for j in 0..r {
            let mut acc = 0.0;
            for p in 0..r {
                for q in 0..r {
                    acc += at(l, p, q) * at(j, p, q);
                }
            }
            s[(l, j)] = acc;
        }
    }
    let delta_scale = 2.0 / (n as f64 - 1.0);
    let raw = |j: usize, k: usize, l: usize, m: usize| -> f64 {
        let mut acc = 0.0;
        for p in 0..r {
            acc += at(p, j, k) * at(p, l, m) + 4.0 * at(l, k, p) * at(j, p, m);
        }
        if k == m {
            acc += delta_scale * s[(l, j)];
        }
        acc
    };
    let pairs: Vec<_> = basis.pairs().collect();
    let d = basis.dim();
    let mut b = DMatrix::zeros(d, d);
    for (x, &(j, k)) in pairs.iter().enumerate() {
        for (y, &(l, m)) in pairs.iter().enumerate() {
            b[(x, y)] = raw(j, k, l, m) - raw(k, j, l, m) - raw(j, k, m, l) + raw(k, j, m, l);
        }
    }
    Ok(DualConeElement {
        b: PackedMatrix::from_matrix_unchecked(basis, b),
        condition: Condition::T2,
        provenance: Provenance::T2(c.clone()),
    })
}

use nalgebra::DMatrix;

use crate::pairspace::{PackedMatrix, PairBasis};

/// Dense antisymmetric four-index tensor `T[i][j][k][l]` over `r` orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct FullTensor {
    r: usize,
    data: Vec<f64>,
}

impl FullTensor {
    pub fn zeros(r: usize) -> Self {
        Self { r, data: vec![0.0; r.pow(4)] }
    }

    /// Expands packed storage to all `r^4` elements.
    pub fn from_packed(d: &PackedMatrix) -> Self {
        let basis = d.basis();
        let r = basis.r();
        let mut t = Self::zeros(r);
        let pairs: Vec<_> = basis.pairs().collect();
        for (a, &(i, j)) in pairs.iter().enumerate() {
            for (b, &(k, l)) in pairs.iter().enumerate() {
                let v = d.get(a, b);
                t.set(i, j, k, l, v);
                t.set(j, i, k, l, -v);
                t.set(i, j, l, k, -v);
                t.set(j, i, l, k, v);
            }
        }
        t
    }

    pub fn r(&self) -> usize {
        self.r
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.r + j) * self.r + k) * self.r + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.offset(i, j, k, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let o = self.offset(i, j, k, l);
        self.data[o] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let o = self.offset(i, j, k, l);
        self.data[o] += v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Adjoint of [`FullTensor::from_packed`] restricted to symmetric packed
/// matrices: `<Z, full(D)> = Tr(pack_adjoint(Z) D)` for every symmetric `D`.
pub fn pack_adjoint(z: &FullTensor, basis: PairBasis) -> PackedMatrix {
    let pairs: Vec<_> = basis.pairs().collect();
    let d = basis.dim();
    let mut m = DMatrix::zeros(d, d);
    for (a, &(p, q)) in pairs.iter().enumerate() {
        for (b, &(s, t)) in pairs.iter().enumerate() {
            m[(a, b)] = z.get(p, q, s, t) - z.get(q, p, s, t) - z.get(p, q, t, s) + z.get(q, p, t, s);
        }
    }
    PackedMatrix::from_matrix_unchecked(basis, m)
}

fn scale_for(n: usize) -> f64 {
    1.0 / (n as f64 - 1.0)
}

/// `gamma_ik = sum_j D[i][j][k][j] / (N-1)`, read straight from packed storage.
pub fn contract(d: &PackedMatrix, n: usize) -> DMatrix<f64> {
    let basis = d.basis();
    let r = basis.r();
    let s = scale_for(n);
    let mut g = DMatrix::zeros(r, r);
    for i in 0..r {
        for k in i..r {
            let mut acc = 0.0;
            for j in 0..r {
                acc += d.full(i, j, k, j);
            }
            g[(i, k)] = acc * s;
            g[(k, i)] = acc * s;
        }
    }
    g
}

/// Adjoint of [`contract`]: `Tr(Y gamma(D)) = Tr(contract_adjoint(Y) D)`.
pub fn contract_adjoint(y: &DMatrix<f64>, basis: PairBasis, n: usize) -> PackedMatrix {
    let r = basis.r();
    let s = scale_for(n);
    let d = basis.dim();
    let mut m = DMatrix::zeros(d, d);
    // D[(ij),(kj)] with i,k != j carries gamma_ik with sign from ordering.
    for j in 0..r {
        for i in 0..r {
            if i == j {
                continue;
            }
            let (a, sa) = basis.lookup(i, j).expect("i != j");
            for k in 0..r {
                if k == j {
                    continue;
                }
                let (b, sb) = basis.lookup(k, j).expect("k != j");
                let yik = 0.5 * (y[(i, k)] + y[(k, i)]);
                m[(a, b)] += sa * sb * yik * s;
            }
        }
    }
    PackedMatrix::from_matrix_unchecked(basis, m)
}

/// The `D`-dependent part of the two-hole matrix (everything but the
/// constant antisymmetrized identity).
pub fn q2_linear(d: &PackedMatrix, n: usize) -> PackedMatrix {
    let basis = d.basis();
    let g = contract(d, n);
    let pairs: Vec<_> = basis.pairs().collect();
    let mut m = d.matrix().clone();
    for (a, &(i, j)) in pairs.iter().enumerate() {
        for (b, &(k, l)) in pairs.iter().enumerate() {
            let mut v = 0.0;
            if j == l {
                v -= g[(i, k)];
            }
            if i == l {
                v += g[(j, k)];
            }
            if j == k {
                v += g[(i, l)];
            }
            if i == k {
                v -= g[(j, l)];
            }
            m[(a, b)] += v;
        }
    }
    PackedMatrix::from_matrix_unchecked(basis, m)
}

/// Adjoint of [`q2_linear`].
pub fn q2_linear_adjoint(y: &PackedMatrix, n: usize) -> PackedMatrix {
    let basis = y.basis();
    let r = basis.r();
    let pairs: Vec<_> = basis.pairs().collect();
    let mut yc = DMatrix::zeros(r, r);
    for (a, &(i, j)) in pairs.iter().enumerate() {
        for (b, &(k, l)) in pairs.iter().enumerate() {
            let v = y.get(a, b);
            if j == l {
                yc[(i, k)] -= v;
            }
            if i == l {
                yc[(j, k)] += v;
            }
            if j == k {
                yc[(i, l)] += v;
            }
            if i == k {
                yc[(j, l)] -= v;
            }
        }
    }
    let c = contract_adjoint(&yc, basis, n);
    y.add_scaled(&c, 1.0).expect("same basis")
}

/// Particle-hole matrix `G[(ij),(kl)] = d_jl gamma_ik - D[i][l][k][j]` over
/// ordered pairs (row `i * r + j`).
pub fn g2_linear(d: &PackedMatrix, n: usize) -> DMatrix<f64> {
    let r = d.basis().r();
    let g = contract(d, n);
    let mut out = DMatrix::zeros(r * r, r * r);
    for i in 0..r {
        for j in 0..r {
            let row = i * r + j;
            for k in 0..r {
                for l in 0..r {
                    let mut v = -d.full(i, l, k, j);
                    if j == l {
                        v += g[(i, k)];
                    }
                    out[(row, k * r + l)] = v;
                }
            }
        }
    }
    crate::pairspace::symmetrize(&mut out);
    out
}

/// Adjoint of [`g2_linear`]; `y` is symmetrized first.
pub fn g2_adjoint(y: &DMatrix<f64>, basis: PairBasis, n: usize) -> PackedMatrix {
    let r = basis.r();
    let mut ys = y.clone();
    crate::pairspace::symmetrize(&mut ys);
    let mut z = FullTensor::zeros(r);
    let mut yc = DMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            let row = i * r + j;
            for k in 0..r {
                yc[(i, k)] += ys[(row, k * r + j)];
                for l in 0..r {
                    z.add(i, l, k, j, -ys[(row, k * r + l)]);
                }
            }
        }
    }
    let p = pack_adjoint(&z, basis);
    p.add_scaled(&contract_adjoint(&yc, basis, n), 1.0).expect("same basis")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let mut m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        crate::pairspace::symmetrize(&mut m);
        m
    }

    #[test]
    fn adjoint_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for r in [4, 5, 6] {
            let basis = PairBasis::new(r);
            let n = 3;
            for _ in 0..5 {
                let d = PackedMatrix::from_matrix_unchecked(basis, random_sym(basis.dim(), &mut rng));
                let yq = PackedMatrix::from_matrix_unchecked(basis, random_sym(basis.dim(), &mut rng));
                let yg = random_sym(r * r, &mut rng);
                let y1 = random_sym(r, &mut rng);

                let lhs = yq.inner(&q2_linear(&d, n)).unwrap();
                let rhs = q2_linear_adjoint(&yq, n).inner(&d).unwrap();
                assert!((lhs - rhs).abs() < 1e-10, "Q2 adjoint {lhs} vs {rhs}");

                let lhs = yg.dot(&g2_linear(&d, n));
                let rhs = g2_adjoint(&yg, basis, n).inner(&d).unwrap();
                assert!((lhs - rhs).abs() < 1e-10, "G2 adjoint {lhs} vs {rhs}");

                let lhs = y1.dot(&contract(&d, n));
                let rhs = contract_adjoint(&y1, basis, n).inner(&d).unwrap();
                assert!((lhs - rhs).abs() < 1e-10, "contraction adjoint {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn full_tensor_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let basis = PairBasis::new(5);
        let d = PackedMatrix::from_matrix_unchecked(basis, random_sym(10, &mut rng));
        let t = FullTensor::from_packed(&d);
        for (i, j) in basis.pairs() {
            for (k, l) in basis.pairs() {
                assert_eq!(t.get(i, j, k, l), d.full(i, j, k, l));
                assert_eq!(t.get(j, i, l, k), d.full(i, j, k, l));
            }
        }
        assert_eq!(t.get(2, 2, 0, 1), 0.0);
    }

    #[test]
    fn zero_inputs() {
        let basis = PairBasis::new(4);
        let zero = PackedMatrix::zeros(basis);
        assert_eq!(g2_linear(&zero, 2).amax(), 0.0);
        assert_eq!(q2_linear(&zero, 2).frobenius_norm(), 0.0);
    }
}

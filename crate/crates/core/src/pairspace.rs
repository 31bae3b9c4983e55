//! Antisymmetric pair indexing and the real symmetric matrices that live on it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating that an input matrix is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Lexicographic indexing of the pairs `(i, j)`, `i < j`, over `r` spin
/// orbitals: `(0,1), (0,2), ..., (r-2, r-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairBasis {
    r: usize,
}

impl PairBasis {
    pub fn new(r: usize) -> Self {
        Self { r }
    }

    /// Number of spin orbitals.
    pub fn r(&self) -> usize {
        self.r
    }

    /// Number of pairs, `r(r-1)/2`.
    pub fn dim(&self) -> usize {
        self.r * self.r.saturating_sub(1) / 2
    }

    /// Packed index and sign of the pair `(i, j)`. The sign is `-1` when the
    /// orbitals are given in descending order.
    pub fn index_of(&self, i: usize, j: usize) -> Result<(usize, f64)> {
        for o in [i, j] {
            if o >= self.r {
                return Err(Error::OrbitalOutOfRange { orbital: o, r: self.r });
            }
        }
        self.lookup(i, j).ok_or(Error::DiagonalPair(i))
    }

    /// Unchecked variant of [`index_of`](Self::index_of); `None` for `i == j`.
    #[inline]
    pub fn lookup(&self, i: usize, j: usize) -> Option<(usize, f64)> {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => Some((self.ordered(i, j), 1.0)),
            Greater => Some((self.ordered(j, i), -1.0)),
            Equal => None,
        }
    }

    /// Index of `(i, j)` with `i < j` assumed.
    #[inline]
    pub fn ordered(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.r);
        i * (2 * self.r - i - 1) / 2 + (j - i - 1)
    }

    /// Ordered pair `(i, j)`, `i < j`, stored at `index`.
    pub fn pair_of(&self, index: usize) -> (usize, usize) {
        assert!(index < self.dim(), "pair index {index} out of range");
        let mut rem = index;
        for i in 0..self.r {
            let row = self.r - i - 1;
            if rem < row {
                return (i, i + 1 + rem);
            }
            rem -= row;
        }
        unreachable!()
    }

    /// All pairs in packed order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.r).flat_map(move |i| (i + 1..self.r).map(move |j| (i, j)))
    }
}

/// A real symmetric matrix over a [`PairBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct PackedMatrix {
    basis: PairBasis,
    m: DMatrix<f64>,
}

impl PackedMatrix {
    pub fn zeros(basis: PairBasis) -> Self {
        let d = basis.dim();
        Self { basis, m: DMatrix::zeros(d, d) }
    }

    /// The two-particle identity `2I`.
    pub fn identity(basis: PairBasis) -> Self {
        let d = basis.dim();
        Self { basis, m: DMatrix::identity(d, d) }
    }

    /// Wraps `m`, rejecting non-square, wrongly sized or asymmetric input.
    /// The stored matrix is symmetrized.
    pub fn from_matrix(basis: PairBasis, m: DMatrix<f64>) -> Result<Self> {
        check_square(&m, basis.dim())?;
        let asym = asymmetry(&m);
        let scale = 1.0f64.max(m.amax());
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self::from_matrix_unchecked(basis, m))
    }

    /// Wraps `m` after symmetrizing it; only the dimension is checked (debug).
    pub fn from_matrix_unchecked(basis: PairBasis, mut m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), basis.dim());
        symmetrize(&mut m);
        Self { basis, m }
    }

    pub fn basis(&self) -> PairBasis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.m[(a, b)]
    }

    /// Sets `(a, b)` and `(b, a)`.
    pub fn set(&mut self, a: usize, b: usize, value: f64) {
        self.m[(a, b)] = value;
        self.m[(b, a)] = value;
    }

    /// Full antisymmetric tensor element `T[i][j][k][l]` read from packed
    /// storage; zero when `i == j` or `k == l`.
    #[inline]
    pub fn full(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        match (self.basis.lookup(i, j), self.basis.lookup(k, l)) {
            (Some((a, sa)), Some((b, sb))) => sa * sb * self.m[(a, b)],
            _ => 0.0,
        }
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// `Tr(A B)`; for symmetric matrices the elementwise product sum.
    pub fn inner(&self, other: &PackedMatrix) -> Result<f64> {
        self.same_basis(other)?;
        Ok(self.m.dot(&other.m))
    }

    pub fn scaled(&self, s: f64) -> PackedMatrix {
        Self { basis: self.basis, m: &self.m * s }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &PackedMatrix, s: f64) -> Result<PackedMatrix> {
        self.same_basis(other)?;
        let mut m = &self.m + &other.m * s;
        symmetrize(&mut m);
        Ok(Self { basis: self.basis, m })
    }

    pub fn eigendecompose(&self) -> Spectrum {
        Spectrum::of_symmetric(&self.m)
    }

    /// Projection onto the positive semidefinite cone.
    pub fn psd_projection(&self) -> PackedMatrix {
        Self::from_matrix_unchecked(self.basis, psd_part(&self.m))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.m)
    }

    fn same_basis(&self, other: &PackedMatrix) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch { left: self.basis.r(), right: other.basis.r() });
        }
        Ok(())
    }
}

/// Eigenvalues in nonincreasing order with the matching orthonormal
/// eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    /// Eigendecomposition of a symmetric matrix. Only the lower triangle is
    /// read, so callers are responsible for symmetry.
    pub fn of_symmetric(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self { eigenvalues: DVector::zeros(0), eigenvectors: DMatrix::zeros(0, 0) };
        }
        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self { eigenvalues, eigenvectors }
    }

    /// Checked variant of [`of_symmetric`](Self::of_symmetric).
    pub fn try_of(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let asym = asymmetry(m);
        if asym > SYMMETRY_TOL * 1.0f64.max(m.amax()) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self::of_symmetric(m))
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `V f(Lambda) V^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[k]);
        }
        let mut out = scaled * self.eigenvectors.transpose();
        symmetrize(&mut out);
        out
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.reconstruct_with(|x| x)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Positive part `V max(Lambda, 0) V^T` of a symmetric matrix.
pub fn psd_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    Spectrum::of_symmetric(m).reconstruct_with(|x| x.max(0.0))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn check_square(m: &DMatrix<f64>, dim: usize) -> Result<()> {
    if m.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
    }
    if m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.ncols() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        symmetrize(&mut m);
        m
    }

    #[test]
    fn index_examples() {
        let b = PairBasis::new(4);
        assert_eq!(b.index_of(0, 1).unwrap(), (0, 1.0));
        assert_eq!(b.index_of(3, 2).unwrap(), (5, -1.0));
        assert!(matches!(b.index_of(2, 2), Err(Error::DiagonalPair(2))));
        assert!(matches!(b.index_of(0, 4), Err(Error::OrbitalOutOfRange { orbital: 4, r: 4 })));
    }

    #[test]
    fn pair_roundtrip_and_bijection() {
        for r in 2..12 {
            let b = PairBasis::new(r);
            assert_eq!(b.dim(), r * (r - 1) / 2);
            let listed: Vec<_> = b.pairs().collect();
            assert_eq!(listed.len(), b.dim());
            for (idx, &(i, j)) in listed.iter().enumerate() {
                assert_eq!(b.index_of(i, j).unwrap(), (idx, 1.0));
                assert_eq!(b.pair_of(idx), (i, j));
            }
        }
    }

    #[test]
    fn swapped_orders_flip_sign_of_full_element() {
        let b = PairBasis::new(5);
        let p = PackedMatrix::from_matrix_unchecked(b, random_symmetric(b.dim(), 3));
        for (i, j) in b.pairs() {
            for (k, l) in b.pairs() {
                let v = p.full(i, j, k, l);
                assert_eq!(p.full(j, i, k, l), -v);
                assert_eq!(p.full(i, j, l, k), -v);
                assert_eq!(p.full(j, i, l, k), v);
            }
        }
        assert_eq!(p.full(1, 1, 2, 3), 0.0);
    }

    #[test]
    fn inner_product_examples() {
        let b = PairBasis::new(4);
        let id = PackedMatrix::identity(b);
        assert_eq!(id.inner(&id).unwrap(), 6.0);
        let x = PackedMatrix::from_matrix_unchecked(b, random_symmetric(6, 9));
        assert!((id.inner(&x).unwrap() - x.trace()).abs() < 1e-14);

        let y = PackedMatrix::from_matrix_unchecked(b, random_symmetric(6, 10));
        let mut naive = 0.0;
        for a in 0..6 {
            for c in 0..6 {
                naive += x.get(a, c) * y.get(c, a);
            }
        }
        assert!((x.inner(&y).unwrap() - naive).abs() < 1e-13);

        let other = PackedMatrix::identity(PairBasis::new(5));
        assert!(matches!(id.inner(&other), Err(Error::BasisMismatch { .. })));
    }

    #[test]
    fn eigendecompose_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let s = Spectrum::try_of(&d).unwrap();
        assert_eq!(s.eigenvalues.as_slice(), &[3.0, 2.0, 1.0]);

        let id = PackedMatrix::identity(PairBasis::new(4)).eigendecompose();
        assert!(id.eigenvalues.iter().all(|&x| (x - 1.0).abs() < 1e-14));

        let m = random_symmetric(10, 1);
        let s = Spectrum::try_of(&m).unwrap();
        assert!((s.reconstruct() - &m).norm() <= 1e-10 * m.norm());
        let vtv = s.eigenvectors.transpose() * &s.eigenvectors;
        assert!((vtv - DMatrix::identity(10, 10)).amax() < 1e-10);
        assert!(s.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 1)] = 1.0;
        assert!(matches!(Spectrum::try_of(&m), Err(Error::NotSymmetric(_))));
        assert!(PackedMatrix::from_matrix(PairBasis::new(3), m).is_err());
    }

    proptest! {
        #[test]
        fn inner_product_is_symmetric_and_bilinear(seed in 0u64..1000, alpha in -3.0f64..3.0) {
            let b = PairBasis::new(5);
            let x = PackedMatrix::from_matrix_unchecked(b, random_symmetric(10, seed));
            let y = PackedMatrix::from_matrix_unchecked(b, random_symmetric(10, seed + 1));
            let z = PackedMatrix::from_matrix_unchecked(b, random_symmetric(10, seed + 2));
            prop_assert!((x.inner(&y).unwrap() - y.inner(&x).unwrap()).abs() < 1e-12);
            let lhs = x.inner(&y.add_scaled(&z, alpha).unwrap()).unwrap();
            let rhs = x.inner(&y).unwrap() + alpha * x.inner(&z).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-11);
        }

        #[test]
        fn psd_projection_is_idempotent(seed in 0u64..1000) {
            let m = random_symmetric(8, seed);
            let once = psd_part(&m);
            let twice = psd_part(&once);
            prop_assert!((&once - &twice).amax() < 1e-9);
            prop_assert!(min_eigenvalue(&once) > -1e-12);
        }
    }
}

//! Full configuration interaction over bitmask determinants.
//!
//! Determinant `mask` has bit `p` set when spin orbital `p` is occupied; a
//! determinant is the ordered product `a+_{p1} a+_{p2} ... |0>` with
//! `p1 < p2 < ...`, so applying `a+_p` or `a_p` picks up `(-1)^k` with `k`
//! the number of occupied orbitals below `p`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hamiltonian::IntegralSet;
use crate::nrep::{OneRdm, TwoRdm};
use crate::pairspace::{PackedMatrix, PairBasis};
use crate::par;

/// Largest `binomial(r, N)` the oracle accepts.
pub const MAX_DETERMINANTS: u128 = 1_000_000;

/// Gap below which the ground state is flagged as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// One second-quantized operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Create(usize),
    Annihilate(usize),
}

/// Applies `ops` (written left to right, so the last one acts first) to a
/// determinant. Returns `None` when the result vanishes.
pub fn apply_operator_string(mask: u64, ops: &[Op]) -> Option<(u64, f64)> {
    let mut m = mask;
    let mut sign = 1.0;
    for op in ops.iter().rev() {
        let (p, create) = match *op {
            Op::Create(p) => (p, true),
            Op::Annihilate(p) => (p, false),
        };
        let bit = 1u64 << p;
        if ((m & bit) != 0) == create {
            return None;
        }
        if (m & (bit - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        m ^= bit;
    }
    Some((m, sign))
}

#[inline]
fn apply_one(mask: u64, p: usize, create: bool) -> Option<(u64, f64)> {
    let bit = 1u64 << p;
    if ((mask & bit) != 0) == create {
        return None;
    }
    let sign = if (mask & (bit - 1)).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
    Some((mask ^ bit, sign))
}

fn occupied(mask: u64, r: usize) -> Vec<usize> {
    (0..r).filter(|&p| mask & (1 << p) != 0).collect()
}

/// Twice the spin projection of a determinant (even orbitals are alpha).
pub fn ms2_of(mask: u64) -> i32 {
    let alpha = (mask & 0x5555_5555_5555_5555).count_ones() as i32;
    let beta = (mask & 0xAAAA_AAAA_AAAA_AAAA).count_ones() as i32;
    alpha - beta
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All `N`-electron determinants over `r` spin orbitals, optionally
/// restricted to one `S_z` sector, in increasing bitmask order.
#[derive(Debug, Clone)]
pub struct DeterminantBasis {
    pub r: usize,
    pub n: usize,
    pub ms2: Option<i32>,
    dets: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl DeterminantBasis {
    pub fn new(r: usize, n: usize, ms2: Option<i32>) -> Result<Self> {
        if r > 63 {
            return Err(Error::InvalidInput(format!("{r} spin orbitals exceed the 63-bit determinant encoding")));
        }
        let size = binomial(r, n);
        if size > MAX_DETERMINANTS {
            return Err(Error::BasisTooLarge { size, limit: MAX_DETERMINANTS });
        }
        let mut dets = Vec::with_capacity(size as usize);
        if n <= r {
            // Gosper's hack walks N-subsets in increasing order.
            let mut m: u64 = if n == 0 { 0 } else { (1u64 << n) - 1 };
            let limit = 1u64 << r;
            loop {
                if ms2.is_none_or(|s| ms2_of(m) == s) {
                    dets.push(m);
                }
                if n == 0 {
                    break;
                }
                let c = m & m.wrapping_neg();
                let rr = m + c;
                if rr >= limit {
                    break;
                }
                m = (((rr ^ m) >> 2) / c) | rr;
            }
        }
        if dets.is_empty() {
            return Err(Error::EmptySector { r, n, ms2: ms2.unwrap_or(0) });
        }
        let index = dets.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        Ok(Self { r, n, ms2, dets, index })
    }

    pub fn len(&self) -> usize {
        self.dets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dets.is_empty()
    }

    pub fn determinants(&self) -> &[u64] {
        &self.dets
    }

    pub fn index_of(&self, mask: u64) -> Option<usize> {
        self.index.get(&mask).copied()
    }
}

/// Second-quantized Hamiltonian `sum h_pq a+_p a_q + sum_{p<q, r<s} <pq||rs> a+_p a+_q a_s a_r`
/// over spin orbitals.
struct SpinHamiltonian {
    r: usize,
    h: DMatrix<f64>,
    /// `<pq||rs>` for `p < q`, `r < s`, indexed by packed pairs.
    v: DMatrix<f64>,
    pairs: Vec<(usize, usize)>,
}

impl SpinHamiltonian {
    fn new(ints: &IntegralSet) -> Self {
        let r = ints.n_spin_orbitals();
        let basis = PairBasis::new(r);
        let pairs: Vec<_> = basis.pairs().collect();
        let d = pairs.len();
        let v = DMatrix::from_fn(d, d, |a, b| {
            let (p, q) = pairs[a];
            let (rr, s) = pairs[b];
            ints.antisymmetrized(p, q, rr, s)
        });
        Self { r, h: ints.spin_orbital_h(), v, pairs }
    }

    /// Nonzero `(J, <J|H|I>)` for determinant `I`, accumulated per target.
    fn column(&self, mask: u64, out: &mut BTreeMap<u64, f64>) {
        out.clear();
        let occ = occupied(mask, self.r);
        for &q in &occ {
            let (m1, s1) = apply_one(mask, q, false).expect("occupied");
            for p in 0..self.r {
                let hpq = self.h[(p, q)];
                if hpq == 0.0 {
                    continue;
                }
                if let Some((m2, s2)) = apply_one(m1, p, true) {
                    *out.entry(m2).or_insert(0.0) += hpq * s1 * s2;
                }
            }
        }
        let basis = PairBasis::new(self.r);
        for (x, &rr) in occ.iter().enumerate() {
            for &s in &occ[x + 1..] {
                let b = basis.ordered(rr, s);
                // a_s a_r acting first: remove r, then s.
                let (m1, s1) = apply_one(mask, rr, false).expect("occupied");
                let (m2, s2) = apply_one(m1, s, false).expect("occupied");
                for (a, &(p, q)) in self.pairs.iter().enumerate() {
                    let v = self.v[(a, b)];
                    if v == 0.0 {
                        continue;
                    }
                    let Some((m3, s3)) = apply_one(m2, q, true) else { continue };
                    let Some((m4, s4)) = apply_one(m3, p, true) else { continue };
                    *out.entry(m4).or_insert(0.0) += v * s1 * s2 * s3 * s4;
                }
            }
        }
    }
}

/// Options for [`fci_ground_state_with`].
#[derive(Debug, Clone)]
pub struct FciOptions {
    /// Dense diagonalization below this dimension, Lanczos above.
    pub dense_limit: usize,
    pub lanczos_max_iter: usize,
    pub lanczos_tol: f64,
    pub seed: u64,
}

impl Default for FciOptions {
    fn default() -> Self {
        Self { dense_limit: 2000, lanczos_max_iter: 500, lanczos_tol: 1e-11, seed: 7 }
    }
}

/// Ground state of one `(N, S_z)` sector.
#[derive(Debug, Clone)]
pub struct FciResult {
    /// Total energy including the core term.
    pub energy: f64,
    /// Gap to the next eigenvalue found, if any.
    pub gap: Option<f64>,
    pub degenerate: bool,
    pub basis: DeterminantBasis,
    pub ground_vector: DVector<f64>,
    pub rdm2: TwoRdm,
    pub rdm1: OneRdm,
    /// `||H psi - E psi|| / ||H||_max-row`.
    pub residual: f64,
}

pub fn fci_ground_state(ints: &IntegralSet, n: usize, ms2: Option<i32>) -> Result<FciResult> {
    fci_ground_state_with(ints, n, ms2, &FciOptions::default())
}

pub fn fci_ground_state_with(ints: &IntegralSet, n: usize, ms2: Option<i32>, opts: &FciOptions) -> Result<FciResult> {
    let r = ints.n_spin_orbitals();
    let basis = DeterminantBasis::new(r, n, ms2)?;
    let ham = SpinHamiltonian::new(ints);
    let dim = basis.len();

    let (e0, gap, psi) = if dim <= opts.dense_limit {
        let h = dense_hamiltonian(&ham, &basis);
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let e0 = eig.eigenvalues[order[0]];
        let gap = order.get(1).map(|&k| eig.eigenvalues[k] - e0);
        (e0, gap, eig.eigenvectors.column(order[0]).into_owned())
    } else {
        lanczos(&ham, &basis, opts)?
    };
    let psi = fix_phase(psi);

    let hpsi = sigma(&ham, &basis, &psi);
    let norm_h = hpsi.norm().max(e0.abs()).max(1.0);
    let residual = (&hpsi - &psi * e0).norm() / norm_h;

    let rdm2 = TwoRdm::new(two_rdm(&basis, &psi), n);
    let rdm1 = OneRdm { gamma: one_rdm(&basis, &psi), n };
    Ok(FciResult {
        energy: e0 + ints.core_energy,
        gap,
        degenerate: gap.is_some_and(|g| g < DEGENERACY_GAP),
        basis,
        ground_vector: psi,
        rdm2,
        rdm1,
        residual,
    })
}

/// Makes the largest-magnitude coefficient positive so results are
/// reproducible across eigensolvers.
fn fix_phase(mut psi: DVector<f64>) -> DVector<f64> {
    let k = psi.iamax();
    if psi[k] < 0.0 {
        psi.neg_mut();
    }
    psi
}

fn dense_hamiltonian(ham: &SpinHamiltonian, basis: &DeterminantBasis) -> DMatrix<f64> {
    let dim = basis.len();
    let cols = par::fixed_chunks(dim, 64, |range| {
        let mut scratch = BTreeMap::new();
        range
            .map(|i| {
                ham.column(basis.dets[i], &mut scratch);
                scratch
                    .iter()
                    .filter_map(|(m, v)| basis.index_of(*m).map(|j| (j, *v)))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    });
    let mut h = DMatrix::zeros(dim, dim);
    for (i, col) in cols.into_iter().flatten().enumerate() {
        for (j, v) in col {
            h[(j, i)] = v;
        }
    }
    crate::pairspace::symmetrize(&mut h);
    h
}

/// `H v`, one output row per determinant (rows of a symmetric `H` equal its
/// columns).
fn sigma(ham: &SpinHamiltonian, basis: &DeterminantBasis, v: &DVector<f64>) -> DVector<f64> {
    let parts = par::fixed_chunks(basis.len(), 256, |range| {
        let mut scratch = BTreeMap::new();
        range
            .map(|i| {
                ham.column(basis.dets[i], &mut scratch);
                scratch
                    .iter()
                    .filter_map(|(m, h)| basis.index_of(*m).map(|j| h * v[j]))
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
    });
    DVector::from_iterator(basis.len(), parts.into_iter().flatten())
}

fn lanczos(ham: &SpinHamiltonian, basis: &DeterminantBasis, opts: &FciOptions) -> Result<(f64, Option<f64>, DVector<f64>)> {
    let dim = basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    q /= q.norm();
    let kmax = opts.lanczos_max_iter.min(dim);
    let mut qs: Vec<DVector<f64>> = vec![q];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = (f64::NAN, None, DVector::zeros(0));
    for k in 0..kmax {
        let mut w = sigma(ham, basis, &qs[k]);
        let a = w.dot(&qs[k]);
        alpha.push(a);
        // Full reorthogonalization, twice for stability.
        for _ in 0..2 {
            for qj in &qs {
                let c = w.dot(qj);
                w.axpy(-c, qj, 1.0);
            }
        }
        let b = w.norm();
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let e0 = eig.eigenvalues[order[0]];
        let y = eig.eigenvectors.column(order[0]);
        let resid = (b * y[m - 1]).abs();
        let gap = order.get(1).map(|&i| eig.eigenvalues[i] - e0);
        if resid < opts.lanczos_tol * e0.abs().max(1.0) || b < 1e-14 || k + 1 == kmax {
            let mut psi = DVector::zeros(dim);
            for (j, qj) in qs.iter().enumerate() {
                psi.axpy(y[j], qj, 1.0);
            }
            psi /= psi.norm();
            last = (e0, gap, psi);
            if resid >= opts.lanczos_tol * e0.abs().max(1.0) && b >= 1e-14 {
                return Err(Error::Numerical {
                    iteration: k,
                    message: format!("Lanczos did not converge (residual {resid:e})"),
                });
            }
            break;
        }
        beta.push(b);
        qs.push(w / b);
    }
    Ok(last)
}

/// Packed `D[(ij),(kl)] = <psi| a+_i a+_j a_l a_k |psi>`.
pub fn two_rdm(basis: &DeterminantBasis, psi: &DVector<f64>) -> PackedMatrix {
    let r = basis.r;
    let pb = PairBasis::new(r);
    let dim = pb.dim();
    let parts = par::fixed_chunks(basis.len(), 128, |range| {
        let mut acc = DMatrix::zeros(dim, dim);
        for idx in range {
            let mask = basis.dets[idx];
            let ci = psi[idx];
            if ci == 0.0 {
                continue;
            }
            let occ = occupied(mask, r);
            for (x, &k) in occ.iter().enumerate() {
                for &l in &occ[x + 1..] {
                    let b = pb.ordered(k, l);
                    let (m1, s1) = apply_one(mask, k, false).expect("occupied");
                    let (m2, s2) = apply_one(m1, l, false).expect("occupied");
                    for (a, (i, j)) in pb.pairs().enumerate() {
                        let Some((m3, s3)) = apply_one(m2, j, true) else { continue };
                        let Some((m4, s4)) = apply_one(m3, i, true) else { continue };
                        if let Some(jdx) = basis.index_of(m4) {
                            acc[(a, b)] += psi[jdx] * ci * s1 * s2 * s3 * s4;
                        }
                    }
                }
            }
        }
        acc
    });
    let mut d = DMatrix::zeros(dim, dim);
    for p in parts {
        d += p;
    }
    PackedMatrix::from_matrix_unchecked(pb, d)
}

/// `gamma_ik = <psi| a+_i a_k |psi>`.
pub fn one_rdm(basis: &DeterminantBasis, psi: &DVector<f64>) -> DMatrix<f64> {
    let r = basis.r;
    let mut g = DMatrix::zeros(r, r);
    for (idx, &mask) in basis.dets.iter().enumerate() {
        let ci = psi[idx];
        for k in occupied(mask, r) {
            let (m1, s1) = apply_one(mask, k, false).expect("occupied");
            for i in 0..r {
                if let Some((m2, s2)) = apply_one(m1, i, true) {
                    if let Some(jdx) = basis.index_of(m2) {
                        g[(i, k)] += psi[jdx] * ci * s1 * s2;
                    }
                }
            }
        }
    }
    crate::pairspace::symmetrize(&mut g);
    g
}

/// Sparse Fock-space vector keyed by determinant bitmask.
pub type FockVector = BTreeMap<u64, f64>;

/// Applies a weighted sum of operator strings to a Fock-space vector.
pub fn apply_terms(psi: &FockVector, terms: &[(f64, Vec<Op>)]) -> FockVector {
    let mut out = FockVector::new();
    for (&mask, &c) in psi {
        for (w, ops) in terms {
            if let Some((m, s)) = apply_operator_string(mask, ops) {
                *out.entry(m).or_insert(0.0) += w * s * c;
            }
        }
    }
    out.retain(|_, v| *v != 0.0);
    out
}

pub fn fock_inner(a: &FockVector, b: &FockVector) -> f64 {
    a.iter().filter_map(|(m, x)| b.get(m).map(|y| x * y)).sum()
}

/// `<psi| ops |psi>`.
pub fn expectation(psi: &FockVector, ops: &[Op]) -> f64 {
    fock_inner(psi, &apply_terms(psi, &[(1.0, ops.to_vec())]))
}

/// Expands a determinant-basis vector into a [`FockVector`].
pub fn to_fock(basis: &DeterminantBasis, psi: &DVector<f64>) -> FockVector {
    basis.dets.iter().zip(psi.iter()).filter(|(_, c)| **c != 0.0).map(|(&m, &c)| (m, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::hubbard_chain;

    #[test]
    fn operator_string_examples() {
        assert_eq!(apply_operator_string(0, &[Op::Create(0)]), Some((0b1, 1.0)));
        assert_eq!(apply_operator_string(0b1, &[Op::Create(0)]), None);
        assert_eq!(apply_operator_string(0b011, &[Op::Create(2), Op::Annihilate(0)]), Some((0b110, -1.0)));
    }

    #[test]
    fn basis_counts_and_order() {
        let b = DeterminantBasis::new(8, 4, None).unwrap();
        assert_eq!(b.len(), 70);
        assert!(b.determinants().windows(2).all(|w| w[0] < w[1]));
        let s = DeterminantBasis::new(8, 4, Some(0)).unwrap();
        assert_eq!(s.len(), 36);
        assert!(matches!(DeterminantBasis::new(4, 2, Some(4)), Err(Error::EmptySector { .. })));
        assert!(matches!(DeterminantBasis::new(60, 30, None), Err(Error::BasisTooLarge { .. })));
    }

    #[test]
    fn hubbard_dimer_energy() {
        let ints = hubbard_chain(2, 1.0, 4.0, false).unwrap();
        let res = fci_ground_state(&ints, 2, Some(0)).unwrap();
        let exact = 2.0 - (4.0f64 + 4.0).sqrt();
        assert!((res.energy - exact).abs() < 1e-12);
        assert!((res.energy + 0.828427).abs() < 1e-6);
        assert!(res.residual < 1e-9);
        assert!((res.rdm2.d.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_particle_energy_is_lowest_orbital() {
        let ints = hubbard_chain(3, 1.0, 5.0, false).unwrap();
        let res = fci_ground_state(&ints, 1, Some(1)).unwrap();
        assert!((res.energy + 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let ints = hubbard_chain(6, 1.0, 4.0, false).unwrap();
        let dense = fci_ground_state(&ints, 6, Some(0)).unwrap();
        let opts = FciOptions { dense_limit: 10, ..FciOptions::default() };
        let iter = fci_ground_state_with(&ints, 6, Some(0), &opts).unwrap();
        assert!((dense.energy - iter.energy).abs() < 1e-10);
        assert!((dense.rdm2.d.matrix() - iter.rdm2.d.matrix()).amax() < 1e-6);
    }
}

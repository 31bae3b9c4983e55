//! Integral sets, lattice models and the two-particle reduced Hamiltonian.

mod fcidump;

pub use fcidump::{parse_fcidump, read_fcidump, write_fcidump};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::pairspace::{PackedMatrix, PairBasis};

/// Spin-free one- and two-electron integrals over spatial orbitals.
///
/// Two-electron integrals are stored densely in chemist notation `(pq|rs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSet {
    pub norb: usize,
    pub n_electrons: usize,
    pub ms2: i32,
    pub core_energy: f64,
    pub h: DMatrix<f64>,
    eri: Vec<f64>,
}

impl IntegralSet {
    /// All-zero integrals.
    pub fn zeros(norb: usize, n_electrons: usize, ms2: i32) -> Self {
        Self {
            norb,
            n_electrons,
            ms2,
            core_energy: 0.0,
            h: DMatrix::zeros(norb, norb),
            eri: vec![0.0; norb.pow(4)],
        }
    }

    /// Number of spin orbitals.
    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.norb
    }

    #[inline]
    fn offset(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        ((p * self.norb + q) * self.norb + r) * self.norb + s
    }

    /// Chemist-notation integral `(pq|rs)`.
    #[inline]
    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.eri[self.offset(p, q, r, s)]
    }

    /// Sets `(pq|rs)` and its seven permutational partners.
    pub fn set_eri(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        for (a, b, c, d) in [
            (p, q, r, s),
            (q, p, r, s),
            (p, q, s, r),
            (q, p, s, r),
            (r, s, p, q),
            (s, r, p, q),
            (r, s, q, p),
            (s, r, q, p),
        ] {
            let o = self.offset(a, b, c, d);
            self.eri[o] = value;
        }
    }

    /// Sets `h[p][q]` and `h[q][p]`.
    pub fn set_h(&mut self, p: usize, q: usize, value: f64) {
        self.h[(p, q)] = value;
        self.h[(q, p)] = value;
    }

    /// Largest deviation from the symmetries of `h` and of the chemist
    /// two-electron integrals.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.norb;
        let mut worst = crate::pairspace::asymmetry(&self.h);
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = self.eri(p, q, r, s);
                        for w in [self.eri(q, p, r, s), self.eri(p, q, s, r), self.eri(r, s, p, q)] {
                            worst = worst.max((v - w).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// `alpha * self + beta * other`, field by field.
    pub fn linear_combination(&self, alpha: f64, other: &IntegralSet, beta: f64) -> Result<IntegralSet> {
        if self.norb != other.norb {
            return Err(Error::DimensionMismatch { expected: self.norb, found: other.norb });
        }
        let mut out = self.clone();
        out.core_energy = alpha * self.core_energy + beta * other.core_energy;
        out.h = &self.h * alpha + &other.h * beta;
        for (o, (a, b)) in out.eri.iter_mut().zip(self.eri.iter().zip(&other.eri)) {
            *o = alpha * a + beta * b;
        }
        Ok(out)
    }

    /// One-electron integrals over spin orbitals.
    pub fn spin_orbital_h(&self) -> DMatrix<f64> {
        let r = self.n_spin_orbitals();
        DMatrix::from_fn(r, r, |i, k| if i % 2 == k % 2 { self.h[(i / 2, k / 2)] } else { 0.0 })
    }

    /// Physicist-notation spin-orbital integral `<ij|kl>`.
    #[inline]
    pub fn spin_coulomb(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        if i % 2 != k % 2 || j % 2 != l % 2 {
            return 0.0;
        }
        self.eri(i / 2, k / 2, j / 2, l / 2)
    }

    /// Antisymmetrized spin-orbital integral `<ij||kl> = <ij|kl> - <ij|lk>`.
    #[inline]
    pub fn antisymmetrized(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.spin_coulomb(i, j, k, l) - self.spin_coulomb(i, j, l, k)
    }
}

/// Nearest-neighbour Hubbard chain with hopping `t` and on-site repulsion `u`.
///
/// The electron count defaults to half filling. For `l == 2` the periodic
/// flag is ignored since the wrap bond coincides with the only bond.
pub fn hubbard_chain(l: usize, t: f64, u: f64, periodic: bool) -> Result<IntegralSet> {
    if l < 2 {
        return Err(Error::InvalidInput(format!("Hubbard chain needs at least 2 sites, got {l}")));
    }
    let mut ints = IntegralSet::zeros(l, l, 0);
    for i in 0..l - 1 {
        ints.set_h(i, i + 1, -t);
    }
    if periodic && l > 2 {
        ints.set_h(0, l - 1, -t);
    }
    for i in 0..l {
        ints.set_eri(i, i, i, i, u);
    }
    Ok(ints)
}

/// The matrix `K` with `E = Tr(K D) + core_energy` for every 2-RDM `D` of
/// `n` particles.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedHamiltonian {
    pub k: PackedMatrix,
    pub n: usize,
    pub core_energy: f64,
}

impl ReducedHamiltonian {
    pub fn basis(&self) -> PairBasis {
        self.k.basis()
    }

    pub fn r(&self) -> usize {
        self.k.basis().r()
    }

    /// Number of particle pairs `N(N-1)/2`, the trace of every valid 2-RDM.
    pub fn n_pairs(&self) -> f64 {
        (self.n * (self.n - 1) / 2) as f64
    }

    /// Same Hamiltonian with `K` replaced.
    pub fn with_k(&self, k: PackedMatrix) -> Self {
        Self { k, n: self.n, core_energy: self.core_energy }
    }
}

/// Builds `K[(ij),(kl)] = (h_ik d_jl + h_jl d_ik - h_il d_jk - h_jk d_il)/(N-1)
/// + <ij||kl>` over interleaved spin orbitals.
pub fn assemble_reduced_hamiltonian(ints: &IntegralSet, n: usize) -> Result<ReducedHamiltonian> {
    let r = ints.n_spin_orbitals();
    if n <= 1 {
        return Err(Error::InvalidInput(format!(
            "reduced Hamiltonian needs at least 2 particles, got {n}"
        )));
    }
    if n > r {
        return Err(Error::InvalidInput(format!("{n} particles do not fit in {r} spin orbitals")));
    }
    let basis = PairBasis::new(r);
    let h = ints.spin_orbital_h();
    let scale = 1.0 / (n as f64 - 1.0);
    let pairs: Vec<(usize, usize)> = basis.pairs().collect();
    let d = basis.dim();
    let mut k = DMatrix::zeros(d, d);
    for (a, &(i, j)) in pairs.iter().enumerate() {
        for (b, &(p, q)) in pairs.iter().enumerate().skip(a) {
            let mut one = 0.0;
            if j == q {
                one += h[(i, p)];
            }
            if i == p {
                one += h[(j, q)];
            }
            if i == q {
                one -= h[(j, p)];
            }
            if j == p {
                one -= h[(i, q)];
            }
            let v = one * scale + ints.antisymmetrized(i, j, p, q);
            k[(a, b)] = v;
            k[(b, a)] = v;
        }
    }
    Ok(ReducedHamiltonian {
        k: PackedMatrix::from_matrix_unchecked(basis, k),
        n,
        core_energy: ints.core_energy,
    })
}

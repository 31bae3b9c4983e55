#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdmcone::fci::DeterminantBasis;
use rdmcone::hamiltonian::{read_fcidump, IntegralSet};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load(name: &str) -> IntegralSet {
    read_fcidump(fixture(name)).unwrap()
}

/// `(label, e_rhf, e_fci)` rows computed by an external program.
pub fn reference() -> Vec<(String, f64, f64)> {
    let text = std::fs::read_to_string(fixture("reference.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normalized random vector over all `N`-electron determinants of `r` orbitals.
pub fn random_state(r: usize, n: usize, rng: &mut ChaCha8Rng) -> (DeterminantBasis, DVector<f64>) {
    let basis = DeterminantBasis::new(r, n, None).unwrap();
    let mut v = DVector::from_fn(basis.len(), |_, _| rng.random_range(-1.0..1.0));
    v /= v.norm();
    (basis, v)
}

/// Random integrals with the full chemist-notation symmetry.
pub fn random_integrals(norb: usize, n: usize, rng: &mut ChaCha8Rng) -> IntegralSet {
    let mut ints = IntegralSet::zeros(norb, n, 0);
    for p in 0..norb {
        for q in 0..=p {
            ints.set_h(p, q, rng.random_range(-1.0..1.0));
        }
    }
    for p in 0..norb {
        for q in 0..norb {
            for r in 0..norb {
                for s in 0..norb {
                    ints.set_eri(p, q, r, s, rng.random_range(-0.5..0.5));
                }
            }
        }
    }
    ints.core_energy = rng.random_range(-1.0..1.0);
    ints
}

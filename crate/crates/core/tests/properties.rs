//! Observables of exact ground states from the FCI oracle.

mod common;

use common::*;
use rdmcone::fci::fci_ground_state;
use rdmcone::hamiltonian::assemble_reduced_hamiltonian;
use rdmcone::properties::{
    dipole_moment, metallic_character, mulliken_charges, natural_orbitals, one_body_expectation, two_body_expectation,
    OneBodyOperator, OrbitalData,
};

#[test]
fn energy_partition_matches_oracle() {
    for name in ["h2_0.74", "h4_1.00"] {
        let ints = load(&format!("{name}.fcidump"));
        let fci = fci_ground_state(&ints, ints.n_electrons, None).unwrap();
        let h = ints.spin_orbital_h();
        let one = one_body_expectation(&fci.rdm1, OneBodyOperator::SpinOrbital(&h)).unwrap();
        let spatial = one_body_expectation(&fci.rdm1, OneBodyOperator::Spatial(&ints.h)).unwrap();
        assert!((one - spatial).abs() < 1e-10);
        let mut two_only = ints.clone();
        two_only.h.fill(0.0);
        two_only.core_energy = 0.0;
        let k2 = assemble_reduced_hamiltonian(&two_only, ints.n_electrons).unwrap();
        let two = two_body_expectation(&fci.rdm2, &k2.k).unwrap();
        assert!((one + two + ints.core_energy - fci.energy).abs() < 1e-9, "{name}");
        let pairs = rdmcone::PackedMatrix::identity(fci.rdm2.basis());
        assert!((two_body_expectation(&fci.rdm2, &pairs).unwrap() - fci.rdm2.n_pairs()).abs() < 1e-10);
    }
}

#[test]
fn h4_orbital_properties() {
    let mut metallic = Vec::new();
    for r in ["0.80", "1.00", "1.50", "2.00", "2.40"] {
        let ints = load(&format!("h4_{r}.fcidump"));
        let orb = OrbitalData::read(fixture(&format!("h4_{r}.orbdata"))).unwrap();
        let fci = fci_ground_state(&ints, 4, None).unwrap();
        let q = mulliken_charges(&fci.rdm1, &orb).unwrap();
        assert!(q.iter().sum::<f64>().abs() < 1e-10);
        assert!((q[0] - q[3]).abs() < 1e-8 && (q[1] - q[2]).abs() < 1e-8, "mirror symmetry {q:?}");
        assert!(dipole_moment(&fci.rdm1, &orb).unwrap().magnitude_debye < 1e-8);
        let no = natural_orbitals(&fci.rdm1, true);
        assert!((no.occupations.iter().sum::<f64>() - 4.0).abs() < 1e-10);
        assert!(no.entropy > 0.0);
        metallic.push((no.entropy, metallic_character(&fci.rdm1, &orb).unwrap()));
    }
    // Stretching the chain localizes the density matrix and correlates it.
    assert!(metallic.windows(2).all(|w| w[1].1 < w[0].1), "{metallic:?}");
    assert!(metallic.windows(2).all(|w| w[1].0 > w[0].0), "{metallic:?}");
}

#[test]
fn dimension_mismatch_is_reported() {
    let orb = OrbitalData::read(fixture("h4_1.00.orbdata")).unwrap();
    let ints = load("h2_0.74.fcidump");
    let fci = fci_ground_state(&ints, 2, None).unwrap();
    assert!(mulliken_charges(&fci.rdm1, &orb).is_err());
    assert!(metallic_character(&fci.rdm1, &orb).is_err());
}

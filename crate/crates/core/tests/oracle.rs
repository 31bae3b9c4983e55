//! Cross-checks of the reduced Hamiltonian, the N-representability maps and
//! the FCI oracle against direct Fock-space evaluation.

mod common;

use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rdmcone::fci::{
    apply_operator_string, apply_terms, expectation, fci_ground_state, fock_inner, to_fock, two_rdm,
    DeterminantBasis, FockVector, Op,
};
use rdmcone::hamiltonian::{
    assemble_reduced_hamiltonian, hubbard_chain, parse_fcidump, write_fcidump, IntegralSet,
};
use rdmcone::nrep::{dq_dual_elements, t2_dual_element, ConeFactor, T2FactorCoefficients, TwoRdm};
use rdmcone::pairspace::{min_eigenvalue, PackedMatrix, PairBasis};

use Op::{Annihilate as A, Create as C};

fn bundled() -> Vec<(String, IntegralSet, usize)> {
    let mut out = Vec::new();
    for l in [2usize, 4] {
        for u in [0.0, 2.0, 4.0, 8.0] {
            out.push((format!("hubbard L={l} U={u}"), hubbard_chain(l, 1.0, u, false).unwrap(), l));
        }
    }
    out.push(("h2".into(), load("h2_0.74.fcidump"), 2));
    out.push(("h4".into(), load("h4_1.00.fcidump"), 4));
    out
}

#[test]
fn fci_matches_external_reference() {
    for (label, _, e_fci) in reference() {
        let ints = load(&format!("{label}.fcidump"));
        let res = fci_ground_state(&ints, ints.n_electrons, Some(0)).unwrap();
        assert!((res.energy - e_fci).abs() < 1e-9, "{label}: {} vs {}", res.energy, e_fci);
    }
}

#[test]
fn reduced_hamiltonian_reproduces_fci_energy() {
    for (label, ints, n) in bundled() {
        let k = assemble_reduced_hamiltonian(&ints, n).unwrap();
        let res = fci_ground_state(&ints, n, Some(0)).unwrap();
        let e = k.k.inner(&res.rdm2.d).unwrap() + k.core_energy;
        assert!((e - res.energy).abs() < 1e-9, "{label}: {e} vs {}", res.energy);
    }
    let dimer = hubbard_chain(2, 1.0, 4.0, false).unwrap();
    let k = assemble_reduced_hamiltonian(&dimer, 2).unwrap();
    let res = fci_ground_state(&dimer, 2, Some(0)).unwrap();
    assert!((k.k.inner(&res.rdm2.d).unwrap() + 0.828427).abs() < 1e-6);
}

#[test]
fn energy_consistency_on_random_integrals() {
    let mut rng = rng(17);
    for trial in 0..10 {
        let norb = 2 + trial % 3;
        let n = 2 + trial % 2;
        let ints = random_integrals(norb, n, &mut rng);
        let k = assemble_reduced_hamiltonian(&ints, n).unwrap();
        let ms2 = (n % 2) as i32;
        let res = fci_ground_state(&ints, n, Some(ms2)).unwrap();
        let e = k.k.inner(&res.rdm2.d).unwrap() + k.core_energy;
        assert!((e - res.energy).abs() <= 1e-8 * res.energy.abs().max(1.0), "trial {trial}");
    }
}

#[test]
fn assembly_is_linear() {
    let mut rng = rng(3);
    let a = random_integrals(3, 2, &mut rng);
    let b = random_integrals(3, 2, &mut rng);
    let (alpha, beta) = (0.7, -1.3);
    let mix = a.linear_combination(alpha, &b, beta).unwrap();
    let ka = assemble_reduced_hamiltonian(&a, 3).unwrap();
    let kb = assemble_reduced_hamiltonian(&b, 3).unwrap();
    let km = assemble_reduced_hamiltonian(&mix, 3).unwrap();
    let expect = ka.k.scaled(alpha).add_scaled(&kb.k, beta).unwrap();
    assert!((km.k.matrix() - expect.matrix()).amax() < 1e-12);
    assert!((km.core_energy - (alpha * a.core_energy + beta * b.core_energy)).abs() < 1e-12);
}

#[test]
fn noninteracting_energy_is_sum_of_orbital_levels() {
    let ints = hubbard_chain(4, 1.0, 0.0, false).unwrap();
    let mut levels: Vec<f64> = SymmetricEigen::new(ints.spin_orbital_h()).eigenvalues.iter().copied().collect();
    levels.sort_by(f64::total_cmp);
    let expect: f64 = levels[..4].iter().sum();
    let res = fci_ground_state(&ints, 4, Some(0)).unwrap();
    assert!((res.energy - expect).abs() < 1e-10);
    assert!((res.energy + 4.472136).abs() < 1e-6);
}

#[test]
fn fcidump_fixture_round_trips() {
    let text = std::fs::read_to_string(fixture("h2_0.74.fcidump")).unwrap();
    let first = parse_fcidump(&text).unwrap();
    let written = write_fcidump(&first);
    let second = parse_fcidump(&written).unwrap();
    assert_eq!(write_fcidump(&second), written);
    let n = first.norb;
    for p in 0..n {
        for q in 0..n {
            assert_eq!(first.h[(p, q)] == 0.0, second.h[(p, q)] == 0.0);
            assert!((first.h[(p, q)] - second.h[(p, q)]).abs() < 1e-14);
            for r in 0..n {
                for s in 0..n {
                    let (x, y) = (first.eri(p, q, r, s), second.eri(p, q, r, s));
                    assert_eq!(x == 0.0, y == 0.0);
                    assert!((x - y).abs() < 1e-14);
                }
            }
        }
    }
    assert!(first.symmetry_defect() < 1e-12);
}

/// Dense Jordan-Wigner matrices of `a_p` on the full Fock space, built
/// independently of the bitmask sign rule.
fn jordan_wigner(r: usize) -> Vec<DMatrix<f64>> {
    let dim = 1 << r;
    (0..r)
        .map(|p| {
            let mut m = DMatrix::zeros(dim, dim);
            for state in 0..dim {
                if state & (1 << p) == 0 {
                    continue;
                }
                let mut sign = 1.0;
                for q in 0..p {
                    if state & (1 << q) != 0 {
                        sign *= -1.0;
                    }
                }
                m[(state ^ (1 << p), state)] = sign;
            }
            m
        })
        .collect()
}

#[test]
fn operator_strings_match_jordan_wigner() {
    let r = 5;
    let jw = jordan_wigner(r);
    let op_matrix = |ops: &[Op]| {
        ops.iter().fold(DMatrix::identity(1 << r, 1 << r), |acc, op| match *op {
            Op::Create(p) => acc * jw[p].transpose(),
            Op::Annihilate(p) => acc * &jw[p],
        })
    };
    let mut rng = rng(9);
    for _ in 0..200 {
        let len = rng.random_range(1..5);
        let ops: Vec<Op> = (0..len)
            .map(|_| if rng.random_bool(0.5) { C(rng.random_range(0..r)) } else { A(rng.random_range(0..r)) })
            .collect();
        let m = op_matrix(&ops);
        for state in 0..(1u64 << r) {
            let col = m.column(state as usize);
            match apply_operator_string(state, &ops) {
                None => assert_eq!(col.amax(), 0.0),
                Some((out, sign)) => {
                    assert_eq!(col[out as usize], sign);
                    assert_eq!(col.amax(), 1.0);
                }
            }
        }
    }
    assert_eq!(apply_operator_string(0b011, &[C(2), A(0)]), Some((0b110, -1.0)));
}

#[test]
fn fci_matches_full_fock_space_diagonalization() {
    let mut rng = rng(23);
    for (norb, n) in [(2usize, 2usize), (3, 2), (3, 3), (4, 3), (4, 4)] {
        let ints = random_integrals(norb, n, &mut rng);
        let r = 2 * norb;
        let jw = jordan_wigner(r);
        let dim = 1 << r;
        let mut h = DMatrix::zeros(dim, dim);
        for p in 0..r {
            for q in 0..r {
                if p % 2 == q % 2 {
                    h += jw[p].transpose() * &jw[q] * ints.h[(p / 2, q / 2)];
                }
            }
        }
        for p in 0..r {
            for q in 0..r {
                for s in 0..r {
                    for t in 0..r {
                        let v = ints.spin_coulomb(p, q, s, t);
                        if v != 0.0 {
                            h += jw[p].transpose() * jw[q].transpose() * &jw[t] * &jw[s] * (0.5 * v);
                        }
                    }
                }
            }
        }
        let ms2 = (n % 2) as i32;
        let sector: Vec<usize> = (0..dim)
            .filter(|&m| (m as u64).count_ones() as usize == n && rdmcone::fci::ms2_of(m as u64) == ms2)
            .collect();
        let block = DMatrix::from_fn(sector.len(), sector.len(), |a, b| h[(sector[a], sector[b])]);
        let e_dense = SymmetricEigen::new(block).eigenvalues.min() + ints.core_energy;
        let res = fci_ground_state(&ints, n, Some(ms2)).unwrap();
        assert!((res.energy - e_dense).abs() < 1e-10, "norb {norb} n {n}");
    }
}

fn lifted_from_state(basis: &DeterminantBasis, psi: &nalgebra::DVector<f64>, n: usize) -> TwoRdm {
    TwoRdm::new(two_rdm(basis, psi), n)
}

#[test]
fn q2_and_g2_match_fock_space() {
    let mut rng = rng(5);
    let mut cases: Vec<(DeterminantBasis, nalgebra::DVector<f64>, usize)> = Vec::new();
    let dimer = fci_ground_state(&hubbard_chain(2, 1.0, 4.0, false).unwrap(), 2, Some(0)).unwrap();
    cases.push((dimer.basis.clone(), dimer.ground_vector.clone(), 2));
    for (r, n) in [(4, 2), (5, 3), (6, 2), (6, 3)] {
        let (b, v) = random_state(r, n, &mut rng);
        cases.push((b, v, n));
    }
    for (basis, psi, n) in cases {
        let r = basis.r;
        let fock = to_fock(&basis, &psi);
        let rdm = lifted_from_state(&basis, &psi, n);
        let q = rdm.lift_q2();
        let pb = PairBasis::new(r);
        for (a, (i, j)) in pb.pairs().enumerate() {
            for (b, (k, l)) in pb.pairs().enumerate() {
                let direct = expectation(&fock, &[A(i), A(j), C(l), C(k)]);
                assert!((q.get(a, b) - direct).abs() < 1e-10, "Q2 ({i}{j},{k}{l})");
            }
        }
        let g = rdm.lift_g2();
        for i in 0..r {
            for j in 0..r {
                for k in 0..r {
                    for l in 0..r {
                        let direct = expectation(&fock, &[C(i), A(j), C(l), A(k)]);
                        assert!((g[(i * r + j, k * r + l)] - direct).abs() < 1e-10, "G2");
                    }
                }
            }
        }
        let gamma = rdm.contract_to_1rdm().unwrap();
        for i in 0..r {
            for k in 0..r {
                let direct = expectation(&fock, &[C(i), A(k)]);
                assert!((gamma.gamma[(i, k)] - direct).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn q2_of_empty_system_is_identity() {
    let basis = PairBasis::new(4);
    let q = TwoRdm::new(PackedMatrix::zeros(basis), 2).lift_q2();
    assert!((q.matrix() - DMatrix::identity(6, 6)).amax() < 1e-15);
}

#[test]
fn g2_of_determinant_has_integer_spectrum() {
    // The occupied diagonal vectors a+_i a_i |det> all equal |det>, so besides
    // the unit eigenvalues of the particle-hole excitations there is one
    // eigenvalue N.
    let basis = DeterminantBasis::new(4, 2, None).unwrap();
    let mut psi = nalgebra::DVector::zeros(basis.len());
    psi[basis.index_of(0b0011).unwrap()] = 1.0;
    let g = lifted_from_state(&basis, &psi, 2).lift_g2();
    let mut eig: Vec<f64> = SymmetricEigen::new(g).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    for v in &eig {
        assert!((v - v.round()).abs() < 1e-12, "eigenvalue {v}");
    }
    let count = |x: f64| eig.iter().filter(|v| (*v - x).abs() < 1e-9).count();
    assert_eq!(count(2.0), 1);
    assert_eq!(count(1.0), 4);
    assert_eq!(count(0.0), 11);
}

/// `<psi| C C+ + C+ C |psi>` for `C = sum_{jkl} c_jkl a+_j a+_k a_l`.
fn t2_expectation(fock: &FockVector, c: &T2FactorCoefficients) -> f64 {
    let r = c.r();
    let mut cre = Vec::new();
    let mut ann = Vec::new();
    for j in 0..r {
        for k in 0..r {
            for l in 0..r {
                let v = c.get(j, k, l);
                if v != 0.0 {
                    cre.push((v, vec![C(j), C(k), A(l)]));
                    ann.push((v, vec![C(l), A(k), A(j)]));
                }
            }
        }
    }
    let x = apply_terms(fock, &cre);
    let y = apply_terms(fock, &ann);
    fock_inner(&x, &x) + fock_inner(&y, &y)
}

fn random_coefficients(r: usize, rng: &mut rand_chacha::ChaCha8Rng) -> T2FactorCoefficients {
    let len = T2FactorCoefficients::len_for(r);
    T2FactorCoefficients::normalized(r, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn t2_element_matches_operator_oracle() {
    let mut rng = rng(41);
    for n in [2usize, 3] {
        for _ in 0..20 {
            let (basis, psi) = random_state(6, n, &mut rng);
            let fock = to_fock(&basis, &psi);
            let d = two_rdm(&basis, &psi);
            let c = random_coefficients(6, &mut rng);
            let b = t2_dual_element(&c, n).unwrap();
            let lhs = b.b.inner(&d).unwrap();
            let rhs = t2_expectation(&fock, &c);
            assert!((lhs - rhs).abs() < 1e-10, "N={n}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn t2_single_coefficient_on_random_pairs() {
    let r = 4;
    let pb = PairBasis::new(r);
    let mut raw = vec![0.0; T2FactorCoefficients::len_for(r)];
    raw[pb.ordered(0, 1) * r + 2] = 1.0;
    let c = T2FactorCoefficients::new(r, raw).unwrap();
    let b = t2_dual_element(&c, 2).unwrap();
    let mut rng = rng(8);
    for _ in 0..20 {
        let (basis, psi) = random_state(r, 2, &mut rng);
        let lhs = b.b.inner(&two_rdm(&basis, &psi)).unwrap();
        let rhs = t2_expectation(&to_fock(&basis, &psi), &c);
        assert!((lhs - rhs).abs() < 1e-10);
    }
}

#[test]
fn exact_states_satisfy_every_condition() {
    let mut rng = rng(77);
    for (label, ints, n) in bundled() {
        let res = fci_ground_state(&ints, n, Some(0)).unwrap();
        let rdm = &res.rdm2;
        assert!(rdm.d.min_eigenvalue() >= -1e-10, "{label} D2");
        assert!(rdm.lift_q2().min_eigenvalue() >= -1e-10, "{label} Q2");
        assert!(min_eigenvalue(&rdm.lift_g2()) >= -1e-10, "{label} G2");
        let gamma = rdm.contract_to_1rdm().unwrap();
        assert!((gamma.gamma - &res.rdm1.gamma).amax() < 1e-10, "{label} contraction");
        let r = ints.n_spin_orbitals();
        let trials = if label.starts_with("hubbard L=4") { 100 } else { 10 };
        for _ in 0..trials {
            let c = random_coefficients(r, &mut rng);
            let b = t2_dual_element(&c, n).unwrap();
            assert!(b.b.inner(&rdm.d).unwrap() >= -1e-10, "{label} T2");
        }
    }
}

#[test]
fn pullbacks_satisfy_adjoint_identity() {
    let ints = hubbard_chain(4, 1.0, 4.0, false).unwrap();
    let res = fci_ground_state(&ints, 4, Some(0)).unwrap();
    let basis = res.rdm2.basis();
    let el = dq_dual_elements(&[ConeFactor::Q2(DMatrix::identity(basis.dim(), basis.dim()))], basis, 4).unwrap();
    let lhs = el[0].b.inner(&res.rdm2.d).unwrap();
    assert!((lhs - res.rdm2.lift_q2().trace()).abs() < 1e-10);
    assert!(lhs >= 0.0);

    let mut rng = rng(4);
    let r = basis.r();
    let v = nalgebra::DVector::from_fn(r * r, |_, _| rng.random_range(-1.0..1.0));
    let y = &v * v.transpose();
    let el = dq_dual_elements(&[ConeFactor::G2(y.clone())], basis, 4).unwrap();
    for _ in 0..5 {
        let mut m = DMatrix::from_fn(basis.dim(), basis.dim(), |_, _| rng.random_range(-1.0..1.0));
        m = &m + m.transpose();
        let d = PackedMatrix::from_matrix(basis, m).unwrap();
        let lhs = el[0].b.inner(&d).unwrap();
        let rhs = y.dot(&TwoRdm::new(d, 4).lift_g2());
        assert!((lhs - rhs).abs() < 1e-10);
    }
}

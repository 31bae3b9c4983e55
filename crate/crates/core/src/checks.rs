//! Invariant checks on bundled systems: lifted maps against Fock-space
//! expectation values, T2 operator identity and positivity, lower-bound
//! safety of both solvers and the multiplier/derivative identity.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dual::{hellmann_feynman_check, solve_dual, DualProblem};
use crate::error::Result;
use crate::fci::{apply_terms, expectation, fci_ground_state, fock_inner, to_fock, two_rdm, DeterminantBasis, FockVector, Op};
use crate::hamiltonian::{assemble_reduced_hamiltonian, hubbard_chain, parse_fcidump, IntegralSet};
use crate::nrep::{t2_dual_element, ConditionSet, T2FactorCoefficients, TwoRdm};
use crate::pairspace::{PackedMatrix, PairBasis};
use crate::primal::{solve_primal, PrimalProblem};

const FIXTURES: [(&str, &str); 6] = [
    ("h2_0.74", include_str!("../tests/fixtures/h2_0.74.fcidump")),
    ("h4_0.80", include_str!("../tests/fixtures/h4_0.80.fcidump")),
    ("h4_1.00", include_str!("../tests/fixtures/h4_1.00.fcidump")),
    ("h4_1.50", include_str!("../tests/fixtures/h4_1.50.fcidump")),
    ("h4_2.00", include_str!("../tests/fixtures/h4_2.00.fcidump")),
    ("h4_2.40", include_str!("../tests/fixtures/h4_2.40.fcidump")),
];

/// A system shipped with the crate.
#[derive(Debug, Clone)]
pub struct BundledSystem {
    pub label: String,
    pub integrals: IntegralSet,
    pub n: usize,
}

/// Open Hubbard chains `L in {2, 4, 6}`, `U in {0, 2, 4, 8}` at half filling,
/// then minimal-basis H2 and H4 chains.
pub fn bundled_systems() -> Vec<BundledSystem> {
    let mut out = Vec::new();
    for l in [2, 4, 6] {
        for u in [0.0, 2.0, 4.0, 8.0] {
            out.push(BundledSystem {
                label: format!("hubbard L={l} U={u}"),
                integrals: hubbard_chain(l, 1.0, u, false).expect("valid chain"),
                n: l,
            });
        }
    }
    for (label, text) in FIXTURES {
        let integrals = parse_fcidump(text).expect("bundled FCIDUMP parses");
        let n = integrals.n_electrons;
        out.push(BundledSystem { label: label.to_string(), integrals, n });
    }
    out
}

/// Bundled molecular integrals by label, e.g. `h4_1.00`.
pub fn bundled_fcidump(label: &str) -> Option<IntegralSet> {
    FIXTURES.iter().find(|(l, _)| *l == label).map(|(_, t)| parse_fcidump(t).expect("bundled FCIDUMP parses"))
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn at_most(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        Self { name: name.into(), passed: value <= tolerance, value, tolerance, detail }
    }
}

fn random_state(r: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<(DeterminantBasis, nalgebra::DVector<f64>)> {
    let basis = DeterminantBasis::new(r, n, None)?;
    let mut v = nalgebra::DVector::from_fn(basis.len(), |_, _| rng.random_range(-1.0..1.0));
    v /= v.norm();
    Ok((basis, v))
}

fn random_t2(r: usize, rng: &mut ChaCha8Rng) -> Result<T2FactorCoefficients> {
    let len = T2FactorCoefficients::len_for(r);
    T2FactorCoefficients::normalized(r, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// `<psi| C C+ + C+ C |psi>` for `C = sum_{jkl} c_jkl a+_j a+_k a_l`,
/// evaluated by acting with the operator strings.
pub fn t2_operator_expectation(psi: &FockVector, c: &T2FactorCoefficients) -> f64 {
    use Op::{Annihilate as A, Create as C};
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
    let x = apply_terms(psi, &cre);
    let y = apply_terms(psi, &ann);
    fock_inner(&x, &x) + fock_inner(&y, &y)
}

/// Largest deviation of the Q2 and G2 lifts of random-state 2-RDMs from the
/// corresponding Fock-space expectation values. The Q2 lift is a parameter so
/// that a faulty map can be shown to fail.
pub fn lift_oracle(seed: u64, q2_lift: &dyn Fn(&TwoRdm) -> PackedMatrix) -> Result<CheckOutcome> {
    use Op::{Annihilate as A, Create as C};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut states = 0;
    for (r, n) in [(4, 2), (5, 3), (6, 3)] {
        for _ in 0..3 {
            let (basis, psi) = random_state(r, n, &mut rng)?;
            let fock = to_fock(&basis, &psi);
            let rdm = TwoRdm::new(two_rdm(&basis, &psi), n);
            let q = q2_lift(&rdm);
            let pb = PairBasis::new(r);
            for (a, (i, j)) in pb.pairs().enumerate() {
                for (b, (k, l)) in pb.pairs().enumerate() {
                    worst = worst.max((q.get(a, b) - expectation(&fock, &[A(i), A(j), C(l), C(k)])).abs());
                }
            }
            let g = rdm.lift_g2();
            for i in 0..r {
                for j in 0..r {
                    for k in 0..r {
                        for l in 0..r {
                            let direct = expectation(&fock, &[C(i), A(j), C(l), A(k)]);
                            worst = worst.max((g[(i * r + j, k * r + l)] - direct).abs());
                        }
                    }
                }
            }
            states += 1;
        }
    }
    Ok(CheckOutcome::at_most(
        "oracle-equivalence",
        worst,
        1e-10,
        format!("Q2 and G2 lifts vs Fock space over {states} random states"),
    ))
}

/// `Tr(B(c) D_psi) = <psi| C C+ + C+ C |psi>` over every pair of `states`
/// random states and `factors` random coefficient sets at `r = 6`, `N = 2, 3`.
pub fn t2_oracle(seed: u64, states: usize, factors: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = 6;
    let mut worst: f64 = 0.0;
    for n in [2, 3] {
        let psis = (0..states).map(|_| random_state(r, n, &mut rng)).collect::<Result<Vec<_>>>()?;
        let cs = (0..factors).map(|_| random_t2(r, &mut rng)).collect::<Result<Vec<_>>>()?;
        let elements = cs.iter().map(|c| t2_dual_element(c, n)).collect::<Result<Vec<_>>>()?;
        for (basis, psi) in &psis {
            let fock = to_fock(basis, psi);
            let d = two_rdm(basis, psi);
            for (c, el) in cs.iter().zip(&elements) {
                let lhs = el.b.inner(&d)?;
                worst = worst.max((lhs - t2_operator_expectation(&fock, c)).abs());
            }
        }
    }
    Ok(CheckOutcome::at_most(
        "t2-oracle",
        worst,
        1e-10,
        format!("{states} states x {factors} factors at r = 6, N = 2 and 3"),
    ))
}

/// `Tr(B(c) D_FCI) >= 0` for random T2 factors on the Hubbard chain
/// `L = 4`, `U = 4`.
pub fn t2_positivity(seed: u64, factors: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ints = hubbard_chain(4, 1.0, 4.0, false)?;
    let fci = fci_ground_state(&ints, 4, Some(0))?;
    let mut lowest = f64::INFINITY;
    for _ in 0..factors {
        let c = random_t2(8, &mut rng)?;
        lowest = lowest.min(t2_dual_element(&c, 4)?.b.inner(&fci.rdm2.d)?);
    }
    Ok(CheckOutcome::at_most(
        "positivity",
        -lowest,
        1e-10,
        format!("min Tr(B D_FCI) = {lowest:e} over {factors} random T2 factors"),
    ))
}

/// Iteration caps for [`lower_bound_safety`]; safety does not depend on
/// convergence, so short runs keep the sweep affordable.
#[derive(Debug, Clone, Copy)]
pub struct SafetyBudget {
    pub primal_iterations: usize,
    pub dual_outer_iterations: usize,
}

impl Default for SafetyBudget {
    fn default() -> Self {
        Self { primal_iterations: 1500, dual_outer_iterations: 4 }
    }
}

/// Per-system result of [`lower_bound_safety`].
#[derive(Debug, Clone, Serialize)]
pub struct SafetyRecord {
    pub label: String,
    pub e_fci: f64,
    pub primal_lower_bound: f64,
    /// Largest certified dual bound over all outer iterations.
    pub dual_worst_bound: f64,
    /// `rigorous_bound` of the final certificate, total energy.
    pub dual_certificate_bound: f64,
}

impl SafetyRecord {
    /// Largest amount by which any bound exceeds the FCI energy.
    pub fn violation(&self) -> f64 {
        [self.primal_lower_bound, self.dual_worst_bound, self.dual_certificate_bound]
            .iter()
            .map(|b| b - self.e_fci)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Solves DQG with both solvers on each system and records every lower bound
/// next to the FCI energy.
pub fn lower_bound_safety(systems: &[BundledSystem], budget: SafetyBudget) -> Result<Vec<SafetyRecord>> {
    systems
        .iter()
        .map(|s| {
            let e_fci = fci_ground_state(&s.integrals, s.n, None)?.energy;
            let ham = assemble_reduced_hamiltonian(&s.integrals, s.n)?;
            let mut p = PrimalProblem::new(ham.clone(), ConditionSet::DQG);
            p.max_iterations = budget.primal_iterations;
            let primal = solve_primal(&p)?;
            let mut d = DualProblem::new(ham.clone(), ConditionSet::DQG);
            d.max_outer_iterations = budget.dual_outer_iterations;
            let dual = solve_dual(&d)?;
            let dual_worst_bound =
                dual.report.history.iter().map(|h| h.lower_bound).fold(f64::NEG_INFINITY, f64::max);
            let cert = crate::dual::rigorous_bound(&dual.certificate, ham.n_pairs()) + ham.core_energy;
            Ok(SafetyRecord {
                label: s.label.clone(),
                e_fci,
                primal_lower_bound: primal.lower_bound,
                dual_worst_bound,
                dual_certificate_bound: cert,
            })
        })
        .collect()
}

pub fn lower_bound_outcome(records: &[SafetyRecord]) -> CheckOutcome {
    let (worst, label) = records
        .iter()
        .map(|r| (r.violation(), r.label.as_str()))
        .fold((f64::NEG_INFINITY, ""), |a, b| if b.0 > a.0 { b } else { a });
    CheckOutcome::at_most(
        "lower-bound-safety",
        worst,
        1e-9,
        format!("{} systems; largest bound - E_FCI = {worst:e} ({label})", records.len()),
    )
}

/// Symmetric random directions of unit Frobenius norm.
pub fn random_directions(basis: PairBasis, count: usize, seed: u64) -> Vec<PackedMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = basis.dim();
    (0..count)
        .map(|_| {
            let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
            let m = (&m + m.transpose()) * 0.5;
            let m = &m / m.norm();
            PackedMatrix::from_matrix_unchecked(basis, m)
        })
        .collect()
}

/// Central difference of the dual DQG energy against `Tr(Delta X*)` on the
/// Hubbard chain `L = 4`, `U = 4`, using the full `r^2` G2 factor rank.
pub fn hellmann_feynman(seed: u64, directions: usize, step: f64) -> Result<CheckOutcome> {
    let ham = assemble_reduced_hamiltonian(&hubbard_chain(4, 1.0, 4.0, false)?, 4)?;
    let r = ham.r();
    let dirs = random_directions(ham.basis(), directions, seed);
    let mut p = DualProblem::new(ham, ConditionSet::DQG);
    p.n_g_factors = r * r;
    let (_, results) = hellmann_feynman_check(&p, &dirs, step)?;
    let worst = results.iter().map(|h| h.discrepancy).fold(0.0, f64::max);
    Ok(CheckOutcome::at_most(
        "hellmann-feynman",
        worst,
        1e-4,
        format!("{directions} directions, step {step:e}, Hubbard L=4 U=4 DQG"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_systems_are_complete() {
        let s = bundled_systems();
        assert_eq!(s.len(), 18);
        assert!(s.iter().all(|s| s.integrals.n_spin_orbitals() >= s.n));
        assert!(bundled_fcidump("h4_1.00").is_some());
        assert!(bundled_fcidump("h4_9.99").is_none());
    }

    #[test]
    fn faulty_q2_lift_is_caught() {
        let good = lift_oracle(1, &|d: &TwoRdm| d.lift_q2()).unwrap();
        assert!(good.passed, "{good:?}");
        let flipped = |d: &TwoRdm| {
            let q = d.lift_q2();
            let id = PackedMatrix::identity(q.basis());
            // Sign error on the D-dependent part.
            id.scaled(2.0).add_scaled(&q, -1.0).unwrap()
        };
        assert!(!lift_oracle(1, &flipped).unwrap().passed);
    }

    #[test]
    fn directions_are_symmetric_unit() {
        for d in random_directions(PairBasis::new(4), 3, 2) {
            assert!((d.frobenius_norm() - 1.0).abs() < 1e-12);
            assert!((d.matrix() - d.matrix().transpose()).amax() == 0.0);
        }
    }
}

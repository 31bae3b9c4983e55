//! JSON report of `rdmcone solve`, schema `rdmcone-report/1`.
//!
//! Everything except the `run` object is a deterministic function of the
//! resolved configuration; `run` holds the wall-clock timestamp and timings.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use rdmcone::dual::{hellmann_feynman_check, rigorous_bound, solve_dual, DualProblem, DualSolution};
use rdmcone::hamiltonian::{assemble_reduced_hamiltonian, IntegralSet};
use rdmcone::primal::{check_feasibility, solve_primal, PrimalProblem};
use rdmcone::properties::{
    bond_coherence, chain_bonds, dipole_moment, metallic_character, mulliken_charges, natural_orbitals, Dipole,
    OrbitalData,
};
use rdmcone::{checks, ConditionSet, ReducedHamiltonian, SolveReport, TwoRdm};
use serde::Serialize;

use crate::input::Source;
use crate::{Method, SolverArgs};

pub const SCHEMA: &str = "rdmcone-report/1";

/// Fully resolved `solve` configuration, echoed into the report.
#[derive(Debug, Clone, Serialize)]
pub struct SolveConfig {
    pub source: Source,
    pub n: usize,
    pub conditions: ConditionSet,
    pub method: Method,
    #[serde(flatten)]
    pub solver: SolverArgs,
    pub fci: bool,
    pub orbdata: Option<PathBuf>,
    pub hf_directions: Option<usize>,
    pub hf_step: f64,
    pub emit_rdm: bool,
}

#[derive(Debug, Serialize)]
pub struct SystemInfo {
    pub label: String,
    pub n_spin_orbitals: usize,
    pub n_electrons: usize,
    pub core_energy: f64,
}

#[derive(Debug, Serialize)]
pub struct PrimalSection {
    pub energy: f64,
    pub lower_bound: f64,
    pub residual_primal: f64,
    pub residual_dual: f64,
    pub residual_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace_error: f64,
    /// Smallest eigenvalue of each enforced metric matrix.
    pub min_eigenvalues: Vec<(rdmcone::Condition, f64)>,
}

#[derive(Debug, Serialize)]
pub struct DualSection {
    pub energy: f64,
    pub rigorous_bound: f64,
    pub best_iterate_bound: f64,
    pub residual: f64,
    pub multiplier_trace_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub g_factors: usize,
    pub t2_factors: usize,
}

#[derive(Debug, Serialize)]
pub struct HfEntry {
    pub central_difference: f64,
    pub predicted: f64,
    pub discrepancy: f64,
    pub converged: bool,
}

#[derive(Debug, Serialize)]
pub struct HfSection {
    pub step: f64,
    pub directions: Vec<HfEntry>,
    pub max_discrepancy: f64,
}

#[derive(Debug, Serialize)]
pub struct Properties {
    /// `primal` or `dual`.
    pub source: &'static str,
    /// Spin-summed natural occupations.
    pub occupations: Vec<f64>,
    /// Spin-orbital `-sum nu ln nu`.
    pub entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bond_coherence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mulliken_charges: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dipole: Option<Dipole>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metallic_character: Option<f64>,
}

/// Packed 2-RDM: `lower_triangle` lists `D[a][b]` for `b <= a` row by row,
/// with pair index `a` enumerating `pairs`.
#[derive(Debug, Serialize)]
pub struct RdmSection {
    pub source: &'static str,
    pub convention: &'static str,
    pub pairs: Vec<(usize, usize)>,
    pub lower_triangle: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct RunInfo {
    pub unix_time: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub config: SolveConfig,
    pub system: SystemInfo,
    /// Primal energy when the primal solver ran, dual energy otherwise.
    pub energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rigorous_bound: Option<f64>,
    /// Largest residual of the solvers that ran.
    pub residual: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fci_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal: Option<PrimalSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualSection>,
    pub properties: Properties,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hf_check: Option<HfSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rdm: Option<RdmSection>,
    pub run: RunInfo,
}

pub fn to_json(rep: &Report) -> Result<String, serde_json::Error> {
    let mut s = serde_json::to_string_pretty(rep)?;
    s.push('\n');
    Ok(s)
}

pub fn primal_problem(ham: &ReducedHamiltonian, conditions: ConditionSet, s: &SolverArgs) -> PrimalProblem {
    let mut p = PrimalProblem::new(ham.clone(), conditions);
    p.tolerance = s.primal_tolerance;
    p.max_iterations = s.max_iterations;
    p
}

pub fn dual_problem(ham: &ReducedHamiltonian, conditions: ConditionSet, s: &SolverArgs) -> DualProblem {
    let mut p = DualProblem::new(ham.clone(), conditions);
    if conditions.g2 {
        p.n_g_factors = s.g_factors.unwrap_or(p.n_g_factors);
    }
    if conditions.t2 {
        p.n_t2_factors = s.t2_factors.unwrap_or(p.n_t2_factors);
    }
    p.tolerance = s.dual_tolerance;
    p.max_outer_iterations = s.max_outer_iterations;
    p.seed = s.seed;
    p
}

fn properties(
    source_name: &'static str,
    rdm: &TwoRdm,
    source: &Source,
    orbitals: Option<&OrbitalData>,
) -> Result<Properties, String> {
    let gamma = rdm.contract_to_1rdm().map_err(|e| e.to_string())?;
    let no = natural_orbitals(&gamma, true);
    let bond_coherence = match source {
        Source::Hubbard(h) => Some(bond_coherence(&gamma, &chain_bonds(h.l, h.periodic)).map_err(|e| e.to_string())?),
        Source::Fcidump(_) => None,
    };
    let (mulliken, dipole, metallic) = match orbitals {
        Some(o) => {
            let q = mulliken_charges(&gamma, o).map_err(|e| format!("orbital data: {e}"))?;
            let d = if o.dipole_integrals.is_some() { Some(dipole_moment(&gamma, o).map_err(|e| e.to_string())?) } else { None };
            let m = metallic_character(&gamma, o).map_err(|e| e.to_string())?;
            (Some(q), d, Some(m))
        }
        None => (None, None, None),
    };
    Ok(Properties {
        source: source_name,
        occupations: no.occupations,
        entropy: no.entropy,
        bond_coherence,
        mulliken_charges: mulliken,
        dipole,
        metallic_character: metallic,
    })
}

fn rdm_section(source: &'static str, rdm: &TwoRdm) -> RdmSection {
    let m = rdm.d.matrix();
    let lower_triangle = (0..m.nrows()).flat_map(|a| (0..=a).map(move |b| m[(a, b)])).collect();
    RdmSection {
        source,
        convention: "D[(ij),(kl)] = <a+_i a+_j a_l a_k>, i<j, k<l; spin orbital 2p is alpha, 2p+1 beta",
        pairs: rdm.basis().pairs().collect(),
        lower_triangle,
    }
}

fn primal_section(r: &SolveReport, conditions: ConditionSet) -> PrimalSection {
    let feas = check_feasibility(&r.rdm, conditions);
    PrimalSection {
        energy: r.energy,
        lower_bound: r.lower_bound,
        residual_primal: r.residual_primal,
        residual_dual: r.residual_dual,
        residual_gap: r.residual_gap,
        iterations: r.iterations,
        converged: r.converged,
        trace_error: feas.trace_error,
        min_eigenvalues: feas.min_eigenvalues,
    }
}

fn dual_section(s: &DualSolution, p: &DualProblem) -> DualSection {
    let ham = &p.ham;
    DualSection {
        energy: s.report.energy,
        rigorous_bound: rigorous_bound(&s.certificate, ham.n_pairs()) + ham.core_energy,
        best_iterate_bound: s.report.lower_bound,
        residual: s.certificate.residual,
        multiplier_trace_error: s.multiplier.to_two_rdm().trace_error(),
        iterations: s.report.iterations,
        converged: s.report.converged,
        g_factors: p.n_g_factors,
        t2_factors: p.n_t2_factors,
    }
}

/// Runs the configured solves. Returns the report and whether every solve
/// converged.
pub fn solve(cfg: &SolveConfig, ints: &IntegralSet, orbitals: Option<&OrbitalData>) -> Result<(Report, bool), String> {
    let start = std::time::Instant::now();
    let mut cfg = cfg.clone();
    let r = ints.n_spin_orbitals();
    cfg.solver.g_factors = Some(if cfg.conditions.g2 { cfg.solver.g_factors.unwrap_or(r) } else { 0 });
    cfg.solver.t2_factors = Some(if cfg.conditions.t2 { cfg.solver.t2_factors.unwrap_or(r) } else { 0 });
    let cfg = &cfg;
    let ham = assemble_reduced_hamiltonian(ints, cfg.n).map_err(|e| e.to_string())?;
    let (run_primal, run_dual) = match cfg.method {
        Method::Auto => (!cfg.conditions.t2, cfg.conditions.t2),
        Method::Primal => (true, false),
        Method::Dual => (false, true),
        Method::Both => (true, true),
    };
    if run_primal && cfg.conditions.t2 {
        return Err("the primal solver does not enforce T2; use --method dual".into());
    }
    if cfg.hf_directions.is_some() && !run_dual {
        return Err("--hf-directions needs the dual solver".into());
    }
    if let Some(o) = orbitals {
        if o.n_mo() != ints.norb {
            return Err(format!("orbital data has {} MOs, Hamiltonian has {} orbitals", o.n_mo(), ints.norb));
        }
    }
    let fci_energy = if cfg.fci {
        Some(rdmcone::fci::fci_ground_state(ints, cfg.n, None).map_err(|e| e.to_string())?.energy)
    } else {
        None
    };

    let primal = if run_primal {
        let p = primal_problem(&ham, cfg.conditions, &cfg.solver);
        Some(solve_primal(&p).map_err(|e| e.to_string())?)
    } else {
        None
    };

    let mut hf_check = None;
    let dual = if run_dual {
        let p = dual_problem(&ham, cfg.conditions, &cfg.solver);
        let sol = match cfg.hf_directions {
            Some(k) => {
                let dirs = checks::random_directions(ham.basis(), k, cfg.solver.seed);
                let (base, results) = hellmann_feynman_check(&p, &dirs, cfg.hf_step).map_err(|e| e.to_string())?;
                let directions: Vec<HfEntry> = results
                    .iter()
                    .map(|h| HfEntry {
                        central_difference: h.central_difference,
                        predicted: h.predicted,
                        discrepancy: h.discrepancy,
                        converged: h.converged,
                    })
                    .collect();
                let max_discrepancy = directions.iter().map(|d| d.discrepancy).fold(0.0, f64::max);
                hf_check = Some(HfSection { step: cfg.hf_step, directions, max_discrepancy });
                base
            }
            None => solve_dual(&p).map_err(|e| e.to_string())?,
        };
        Some((sol, p))
    } else {
        None
    };

    let (prop_source, prop_rdm) = match (&primal, &dual) {
        (Some(r), _) => ("primal", &r.rdm),
        (None, Some((s, _))) => ("dual", &s.report.rdm),
        (None, None) => unreachable!("at least one solver runs"),
    };
    let properties = properties(prop_source, prop_rdm, &cfg.source, orbitals)?;
    let rdm = cfg.emit_rdm.then(|| rdm_section(prop_source, prop_rdm));

    let primal_section = primal.as_ref().map(|r| primal_section(r, cfg.conditions));
    let dual_section = dual.as_ref().map(|(s, p)| dual_section(s, p));
    let energy = primal_section.as_ref().map(|p| p.energy).or(dual_section.as_ref().map(|d| d.energy)).unwrap_or(f64::NAN);
    let residual = [
        primal.as_ref().map(|r| r.residual_primal.max(r.residual_dual)),
        dual.as_ref().map(|(s, _)| s.report.residual_primal),
    ]
    .into_iter()
    .flatten()
    .fold(0.0, f64::max);
    let converged = primal.as_ref().is_none_or(|r| r.converged) && dual.as_ref().is_none_or(|(s, _)| s.report.converged);

    let report = Report {
        schema: SCHEMA,
        config: cfg.clone(),
        system: SystemInfo {
            label: cfg.source.label(),
            n_spin_orbitals: ints.n_spin_orbitals(),
            n_electrons: cfg.n,
            core_energy: ints.core_energy,
        },
        energy,
        rigorous_bound: dual_section.as_ref().map(|d| d.rigorous_bound),
        residual,
        converged,
        fci_energy,
        primal: primal_section,
        dual: dual_section,
        properties,
        hf_check,
        rdm,
        run: RunInfo {
            unix_time: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    };
    Ok((report, converged))
}

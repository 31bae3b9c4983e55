//! `rdmcone`: variational 2-RDM lower bounds from the command line.
//!
//! Exit codes: 0 on success, 2 when a solve did not converge or a check
//! failed (the report is still written), 1 on input errors (nothing written).

mod input;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use input::{read_reference, HubbardSpec, Source};
use rdmcone::checks::{self, CheckOutcome, SafetyBudget};
use rdmcone::ConditionSet;

#[derive(Parser)]
#[command(name = "rdmcone", version, about = "Variational 2-RDM lower bounds for fermion Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one system and write a JSON report.
    Solve(SolveArgs),
    /// Solve a list of systems and write one CSV row per system.
    Scan(ScanArgs),
    /// Run the invariant suite on the bundled systems.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Primal without T2, dual with T2.
    Auto,
    Primal,
    Dual,
    Both,
}

/// Solver settings shared by `solve` and `scan`.
#[derive(Args, Debug, Clone, Serialize)]
pub struct SolverArgs {
    /// G2 factor count for the dual solver [default: number of spin orbitals].
    #[arg(long)]
    pub g_factors: Option<usize>,
    /// T2 factor count for the dual solver [default: number of spin orbitals].
    #[arg(long)]
    pub t2_factors: Option<usize>,
    /// Primal convergence threshold on max(primal, dual, gap) residuals.
    #[arg(long, default_value_t = 1e-6)]
    pub primal_tolerance: f64,
    /// Dual convergence threshold on the fitting residual norm.
    #[arg(long, default_value_t = 1e-7)]
    pub dual_tolerance: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 60)]
    pub max_outer_iterations: usize,
    /// Seed of the dual factor initialization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["hubbard", "fcidump"]))]
struct SolveArgs {
    /// Hubbard chain, e.g. `L=4,t=1,U=4` (append `,periodic` for a ring).
    #[arg(long)]
    hubbard: Option<HubbardSpec>,
    /// FCIDUMP file.
    #[arg(long)]
    fcidump: Option<PathBuf>,
    /// Particle number [default: L for Hubbard, NELEC for FCIDUMP].
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "dqg")]
    conditions: ConditionSet,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    method: Method,
    #[command(flatten)]
    solver: SolverArgs,
    /// Compare against the FCI oracle.
    #[arg(long)]
    fci: bool,
    /// ORBDATA file for Mulliken charges, dipole and metallic character.
    #[arg(long)]
    orbdata: Option<PathBuf>,
    /// Run a derivative check of the dual energy along this many random
    /// directions.
    #[arg(long)]
    hf_directions: Option<usize>,
    #[arg(long, default_value_t = 1e-4)]
    hf_step: f64,
    /// Include the packed 2-RDM in the report.
    #[arg(long)]
    emit_rdm: bool,
    /// Report path [default: stdout].
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ScanArgs {
    /// Systems: FCIDUMP paths or `hubbard:L=4,U=2`.
    inputs: Vec<String>,
    /// Particle number [default: per input].
    #[arg(long)]
    n: Option<usize>,
    /// Also run the dual solver with T2.
    #[arg(long)]
    with_dqgt: bool,
    /// Skip the FCI oracle.
    #[arg(long)]
    no_fci: bool,
    /// CSV with `label` and `e_ref` (or `e_rhf`) columns.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Points solved concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// CSV path [default: stdout].
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckName {
    OracleEquivalence,
    T2Oracle,
    Positivity,
    LowerBoundSafety,
    HellmannFeynman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Fault {
    /// Flip the sign of the density-dependent part of the Q2 lift.
    Q2Sign,
}

#[derive(Args, Debug, Clone)]
struct VerifyArgs {
    /// Run only these checks (repeatable).
    #[arg(long, value_enum)]
    only: Vec<CheckName>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<Fault>,
    /// Report path [default: stdout].
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Failure before any output is produced.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Scan(a) => cmd_scan(&a),
        Command::Verify(a) => cmd_verify(&a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Caps the global pool at `RDMCONE_THREADS`.
fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("RDMCONE_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("RDMCONE_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("RDMCONE_THREADS must be at least 1".into());
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    Ok(())
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: Option<&Path>, contents: &str) -> Result<(), InputError> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())?;
            out.flush()?;
        }
        Some(p) => {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            tmp.write_all(contents.as_bytes())?;
            tmp.persist(p).map_err(|e| format!("{}: {}", p.display(), e.error))?;
        }
    }
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> Result<bool, InputError> {
    let source = match (&a.hubbard, &a.fcidump) {
        (Some(h), None) => Source::Hubbard(*h),
        (None, Some(p)) => Source::Fcidump(p.clone()),
        _ => return Err(InputError("exactly one of --hubbard and --fcidump is required".into())),
    };
    let ints = source.load().map_err(InputError)?;
    let orbitals = match &a.orbdata {
        Some(p) => Some(rdmcone::properties::OrbitalData::read(p).map_err(|e| input::describe(p, e))?),
        None => None,
    };
    let config = report::SolveConfig {
        source,
        n: a.n.unwrap_or(ints.n_electrons),
        conditions: a.conditions,
        method: a.method,
        solver: a.solver.clone(),
        fci: a.fci,
        orbdata: a.orbdata.clone(),
        hf_directions: a.hf_directions,
        hf_step: a.hf_step,
        emit_rdm: a.emit_rdm,
    };
    let (rep, ok) = report::solve(&config, &ints, orbitals.as_ref()).map_err(InputError)?;
    let json = report::to_json(&rep)?;
    write_atomic(a.output.as_deref(), &json)?;
    Ok(ok)
}

#[derive(Debug, Default)]
struct ScanRow {
    label: String,
    r: usize,
    n: usize,
    e_ref: Option<f64>,
    e_fci: Option<f64>,
    e_dqg: Option<f64>,
    e_dqg_lower: Option<f64>,
    e_dqgt: Option<f64>,
    e_dqgt_lower: Option<f64>,
    status: String,
}

const SCAN_COLUMNS: [&str; 12] = [
    "label",
    "n_spin_orbitals",
    "n_electrons",
    "e_ref",
    "e_fci",
    "e_dqg",
    "e_dqg_lower",
    "e_dqgt",
    "e_dqgt_lower",
    "gap_dqg",
    "gap_dqgt",
    "status",
];

/// Twelve significant digits, shortest round-trip form.
fn sig12(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => {
            let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
            let a = rounded.abs();
            if a != 0.0 && !(1e-4..1e15).contains(&a) {
                format!("{rounded:e}")
            } else {
                format!("{rounded}")
            }
        }
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

fn scan_point(source: &Source, n: Option<usize>, a: &ScanArgs, reference: &[(String, f64)]) -> ScanRow {
    let label = source.label();
    let mut row = ScanRow { label: label.clone(), ..ScanRow::default() };
    row.e_ref = reference.iter().find(|(l, _)| *l == label).map(|(_, v)| *v);
    let mut flags = Vec::new();
    let result = (|| -> Result<(), String> {
        let ints = source.load()?;
        let n = n.unwrap_or(ints.n_electrons);
        row.r = ints.n_spin_orbitals();
        row.n = n;
        if !a.no_fci {
            match rdmcone::fci::fci_ground_state(&ints, n, None) {
                Ok(f) => row.e_fci = Some(f.energy),
                Err(rdmcone::Error::BasisTooLarge { .. }) => {}
                Err(e) => return Err(e.to_string()),
            }
        }
        let ham = rdmcone::hamiltonian::assemble_reduced_hamiltonian(&ints, n).map_err(|e| e.to_string())?;
        let p = report::primal_problem(&ham, ConditionSet::DQG, &a.solver);
        let primal = rdmcone::primal::solve_primal(&p).map_err(|e| e.to_string())?;
        row.e_dqg = Some(primal.energy);
        row.e_dqg_lower = Some(primal.lower_bound);
        if !primal.converged {
            flags.push("dqg not converged");
        }
        if a.with_dqgt {
            let d = report::dual_problem(&ham, ConditionSet::DQGT, &a.solver);
            let dual = rdmcone::dual::solve_dual(&d).map_err(|e| e.to_string())?;
            row.e_dqgt = Some(dual.report.energy);
            row.e_dqgt_lower = Some(dual.report.lower_bound);
            if !dual.report.converged {
                flags.push("dqgt not converged");
            }
        }
        Ok(())
    })();
    row.status = match result {
        Err(e) => format!("error: {e}"),
        Ok(()) if flags.is_empty() => "ok".into(),
        Ok(()) => flags.join("; "),
    };
    row
}

fn cmd_scan(a: &ScanArgs) -> Result<bool, InputError> {
    if a.inputs.is_empty() {
        return Err(InputError("scan needs at least one input".into()));
    }
    if a.jobs == 0 {
        return Err(InputError("--jobs must be at least 1".into()));
    }
    let sources = a.inputs.iter().map(|s| Source::parse(s)).collect::<Result<Vec<_>, _>>()?;
    let reference = match &a.reference {
        Some(p) => read_reference(p)?,
        None => Vec::new(),
    };
    let run = || rdmcone::par::map(&sources, |s| scan_point(s, a.n, a, &reference));
    #[cfg(feature = "parallel")]
    let rows = rayon::ThreadPoolBuilder::new().num_threads(a.jobs.min(rdmcone::par::threads())).build()?.install(run);
    #[cfg(not(feature = "parallel"))]
    let rows = run();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SCAN_COLUMNS)?;
    for r in &rows {
        let gap = |e: Option<f64>| r.e_fci.zip(e).map(|(f, e)| f - e);
        w.write_record([
            r.label.clone(),
            r.r.to_string(),
            r.n.to_string(),
            sig12(r.e_ref),
            sig12(r.e_fci),
            sig12(r.e_dqg),
            sig12(r.e_dqg_lower),
            sig12(r.e_dqgt),
            sig12(r.e_dqgt_lower),
            sig12(gap(r.e_dqg)),
            sig12(gap(r.e_dqgt)),
            r.status.clone(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    write_atomic(a.output.as_deref(), &String::from_utf8(bytes)?)?;
    Ok(rows.iter().all(|r| r.status == "ok"))
}

#[derive(Serialize)]
struct VerifyReport {
    schema: &'static str,
    seed: u64,
    checks: Vec<CheckOutcome>,
    passed: bool,
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool, InputError> {
    let selected = |c: CheckName| a.only.is_empty() || a.only.contains(&c);
    let mut outcomes = Vec::new();
    if selected(CheckName::OracleEquivalence) {
        let outcome = match a.inject_fault {
            Some(Fault::Q2Sign) => checks::lift_oracle(a.seed, &|d: &rdmcone::TwoRdm| {
                let q = d.lift_q2();
                rdmcone::PackedMatrix::identity(q.basis()).scaled(2.0).add_scaled(&q, -1.0).expect("same basis")
            }),
            None => checks::lift_oracle(a.seed, &|d: &rdmcone::TwoRdm| d.lift_q2()),
        };
        outcomes.push(outcome?);
    }
    if selected(CheckName::T2Oracle) {
        outcomes.push(checks::t2_oracle(a.seed, 20, 20)?);
    }
    if selected(CheckName::Positivity) {
        outcomes.push(checks::t2_positivity(a.seed, 100)?);
    }
    if selected(CheckName::LowerBoundSafety) {
        let records = checks::lower_bound_safety(&checks::bundled_systems(), SafetyBudget::default())?;
        outcomes.push(checks::lower_bound_outcome(&records));
    }
    if selected(CheckName::HellmannFeynman) {
        outcomes.push(checks::hellmann_feynman(a.seed, 3, 1e-4)?);
    }
    for o in &outcomes {
        eprintln!("{} {}: {:e} (tolerance {:e}) {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.value, o.tolerance, o.detail);
    }
    let passed = outcomes.iter().all(|o| o.passed);
    let rep = VerifyReport { schema: "rdmcone-verify/1", seed: a.seed, checks: outcomes, passed };
    let mut json = serde_json::to_string_pretty(&rep)?;
    json.push('\n');
    write_atomic(a.output.as_deref(), &json)?;
    Ok(passed)
}

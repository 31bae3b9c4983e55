//! End-to-end behavior of the `rdmcone` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn rdmcone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdmcone")).args(args).output().unwrap()
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn dimer_solve_reports_exact_energy() {
    let out = rdmcone(&["solve", "--hubbard", "L=2,t=1,U=4", "--n", "2", "--conditions", "dqg"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "rdmcone-report/1");
    assert!((v["energy"].as_f64().unwrap() + 0.828427).abs() < 1e-5);
    assert!(v.get("rigorous_bound").is_none());
    assert_eq!(v["config"]["g_factors"], 4);
}

#[test]
fn dual_dqgt_report_fields() {
    let out = rdmcone(&["solve", "--fcidump", &fixture("h2_0.74.fcidump"), "--conditions", "dqgt", "--method", "dual"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    for key in ["energy", "rigorous_bound", "residual"] {
        assert!(v[key].is_number(), "{key}");
    }
    assert!(v.get("hf_check").is_none());
    assert!(v.get("rdm").is_none());
    let bound = v["rigorous_bound"].as_f64().unwrap();
    assert!(bound <= -1.137283834489 + 1e-9);
    assert!((v["energy"].as_f64().unwrap() + 1.137283834489).abs() < 1e-5);
}

#[test]
fn orbital_properties_of_h4() {
    let out = rdmcone(&[
        "solve",
        "--fcidump",
        &fixture("h4_1.00.fcidump"),
        "--orbdata",
        &fixture("h4_1.00.orbdata"),
        "--emit-rdm",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let p = &v["properties"];
    let q: f64 = p["mulliken_charges"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!(q.abs() < 1e-6, "neutral molecule, total charge {q}");
    // Symmetric chain: charges mirror and the dipole vanishes.
    let c: Vec<f64> = p["mulliken_charges"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((c[0] - c[3]).abs() < 1e-4 && (c[1] - c[2]).abs() < 1e-4);
    assert!(p["dipole"]["magnitude_debye"].as_f64().unwrap() < 1e-3);
    assert!(p["metallic_character"].as_f64().unwrap() > 0.0);
    let occ: f64 = p["occupations"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((occ - 4.0).abs() < 1e-6);
    let dim = 28;
    assert_eq!(v["rdm"]["pairs"].as_array().unwrap().len(), dim);
    assert_eq!(v["rdm"]["lower_triangle"].as_array().unwrap().len(), dim * (dim + 1) / 2);
}

#[test]
fn hubbard_u_scan_gaps_grow() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let inputs: Vec<String> = [0, 2, 4, 8].iter().map(|u| format!("hubbard:L=4,t=1,U={u}")).collect();
    // DQG is exact at U = 0, where the gap of a feasible primal point is
    // nonpositive and of the order of the tolerance.
    let mut args = vec!["scan", "--jobs", "2", "--primal-tolerance", "1e-8", "-o", path.to_str().unwrap()];
    args.extend(inputs.iter().map(String::as_str));
    let out = rdmcone(&args);
    assert!(matches!(out.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let labels: Vec<&str> = rows.iter().map(|r| &r[col("label")]).collect();
    assert_eq!(labels, ["hubbard L=4 t=1 U=0", "hubbard L=4 t=1 U=2", "hubbard L=4 t=1 U=4", "hubbard L=4 t=1 U=8"]);
    let gaps: Vec<f64> = rows.iter().map(|r| r[col("gap_dqg")].parse().unwrap()).collect();
    assert!(gaps.iter().all(|g| *g >= -1e-8), "{gaps:?}");
    assert!(gaps.windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
}

#[test]
fn scan_without_inputs_is_an_input_error() {
    assert_eq!(rdmcone(&["scan"]).status.code(), Some(1));
}

#[test]
fn scan_flags_failed_rows_and_continues() {
    let out = rdmcone(&["scan", "missing.fcidump", "hubbard:L=2,U=1"]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("missing,") && lines[1].contains("error"));
    assert!(lines[2].ends_with(",ok"));
}

#[test]
fn malformed_input_names_path_and_line_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fcidump");
    std::fs::write(&bad, "&FCI NORB=2,NELEC=2,MS2=0\n&END\n0.5 1 1 1 x\n").unwrap();
    let report = dir.path().join("report.json");
    let out = rdmcone(&["solve", "--fcidump", bad.to_str().unwrap(), "-o", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.fcidump") && err.contains("line 3"), "{err}");
    assert!(!report.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1, "no temporary files left behind");
}

#[test]
fn nonconvergence_exits_two_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = rdmcone(&["solve", "--hubbard", "L=4,U=4", "--max-iterations", "5", "-o", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["converged"], false);
}

#[test]
fn thread_cap_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_rdmcone"))
        .args(["solve", "--hubbard", "L=2,U=4"])
        .env("RDMCONE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_rdmcone"))
        .args(["solve", "--hubbard", "L=2,U=4"])
        .env("RDMCONE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn primal_t2_request_is_rejected() {
    let out = rdmcone(&["solve", "--hubbard", "L=2,U=4", "--conditions", "dqgt", "--method", "primal"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_filter_runs_only_requested_check() {
    let out = rdmcone(&["verify", "--only", "hellmann-feynman"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 1);
    assert_eq!(checks[0]["name"], "hellmann-feynman");
    assert_eq!(v["passed"], true);
}

#[test]
fn injected_q2_sign_error_fails_oracle_check() {
    let out = rdmcone(&["verify", "--only", "oracle-equivalence", "--inject-fault", "q2-sign"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["checks"][0]["passed"], false);
    let clean = rdmcone(&["verify", "--only", "oracle-equivalence", "--only", "t2-oracle", "--only", "positivity"]);
    assert_eq!(clean.status.code(), Some(0));
}

use std::process::Command;

use tt_amen::{TtMatrix, TtVector};
use tt_amen_cli::io::{write_tt_matrix, write_tt_vector};
use tt_amen_cli::report::read_csv;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tt-amen"))
}

#[test]
fn converged_run_exits_zero_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["solve", "--problem", "poisson", "--d", "3", "--n", "5", "--tol", "1e-8", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["log.csv", "summary.json", "solution.json", "solution.bin"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn non_convergence_exits_two() {
    let out = bin().args(["solve", "--d", "6", "--n", "8", "--tol", "1e-12", "--max-sweeps", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_input_exits_three() {
    assert_eq!(bin().args(["solve", "--tol", "-1"]).output().unwrap().status.code(), Some(3));
    assert_eq!(bin().args(["solve", "--solver", "nope"]).output().unwrap().status.code(), Some(3));
    assert_eq!(bin().args(["solve", "--problem", "custom"]).output().unwrap().status.code(), Some(3));
    assert_eq!(bin().args(["solve", "--reference", "dense", "--d", "4", "--n", "16"]).output().unwrap().status.code(), Some(3));
}

#[test]
fn missing_files_exit_four() {
    let out = bin().args(["solve", "--problem", "custom", "--matrix", "/no/such/a.json", "--rhs", "/no/such/y.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("No such file"));
}

#[test]
fn identity_system_takes_one_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let (a, y) = (dir.path().join("a.json"), dir.path().join("y.json"));
    write_tt_matrix(&TtMatrix::identity(&[3, 4, 2]).unwrap(), &a).unwrap();
    write_tt_vector(&TtVector::rank_one(&[vec![1.0, 2.0, 3.0], vec![1.0, -1.0, 0.5, 2.0], vec![3.0, 1.0]]).unwrap(), &y).unwrap();
    let out_dir = dir.path().join("run");
    let out = bin().args(["solve", "--problem", "custom", "--matrix"]).arg(&a).arg("--rhs").arg(&y).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&out_dir.join("log.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].rel_residual < 1e-14);
}

#[test]
fn spec_file_overrides_flags_and_jobs_isolate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("batch.json");
    std::fs::write(&spec, r#"[{"d": 2, "n": 4, "tol": 1e-9}, {"d": 3, "n": 4, "solver": "amen_chol"}]"#).unwrap();
    let out = bin()
        .args(["solve", "--tol", "1e-2", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(dir.path().join("runs"))
        .env("TT_AMEN_JOBS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let first: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("runs/exp000/summary.json")).unwrap()).unwrap();
    let second: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("runs/exp001/summary.json")).unwrap()).unwrap();
    assert_eq!(first["config"]["tol"], 1e-9);
    assert_eq!(second["config"]["tol"], 1e-2);
    assert_eq!(second["config"]["solver"], "amen_chol");
}

#[test]
fn diag_checks_pass_and_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    for check in ["kantorovich", "fom", "rate"] {
        let path = dir.path().join(format!("{check}.json"));
        let out = bin().args(["diag", "--check", check, "--trials", "3", "--seed", "5", "--out"]).arg(&path).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{check}: {}", String::from_utf8_lossy(&out.stderr));
        let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(rep["passed"], true);
        assert_eq!(rep["check"], check);
    }
}

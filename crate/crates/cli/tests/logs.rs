use std::path::Path;

use serde_json::{json, Map};
use tt_amen::amen::ConvergenceLog;
use tt_amen_cli::experiment::parse_spec;
use tt_amen_cli::report::{log_to_csv, read_csv, CsvRow, CSV_HEADER};
use tt_amen_cli::{run_experiment, CliError};

fn spec(v: serde_json::Value) -> tt_amen_cli::ExperimentSpec {
    parse_spec(&Map::new(), &v).unwrap()
}

fn golden_spec() -> tt_amen_cli::ExperimentSpec {
    spec(json!({"problem": "poisson", "d": 3, "n": 8, "solver": "amen_svd", "tol": 1e-10, "seed": 7, "reference": "dense"}))
}

#[test]
fn empty_log_is_header_only() {
    assert_eq!(log_to_csv(&ConvergenceLog::new()), format!("{}\n", CSV_HEADER.join(",")));
}

#[test]
fn rows_follow_sweeps_and_missing_errors_are_empty() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(json!({"d": 3, "n": 6, "tol": 1e-12, "max_sweeps": 2, "local_stop": false}));
    s.out = Some(dir.path().to_path_buf());
    let run = run_experiment(&s).unwrap();
    assert_eq!(run.log.sweeps(), 2);
    let text = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].split(',').nth(3).unwrap().is_empty());
    let rows = read_csv(&dir.path().join("log.csv")).unwrap();
    assert!(rows[0].wall_time_s <= rows[1].wall_time_s);
    assert_eq!(rows.iter().map(|r| r.sweep).collect::<Vec<_>>(), vec![1, 2]);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["sweeps"], 2);
    assert_eq!(summary["config"]["tol"], 1e-12);
    assert!(summary["diagnostics"]["problem"]["operator_ranks"].is_array());
}

fn numeric_columns_match(a: &[CsvRow], b: &[CsvRow], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert_eq!((x.sweep, x.max_rank, x.local_converged), (y.sweep, y.max_rank, y.local_converged));
        assert!((x.rel_residual - y.rel_residual).abs() <= tol, "{} vs {}", x.rel_residual, y.rel_residual);
        match (x.a_norm_error, y.a_norm_error) {
            (Some(p), Some(q)) => assert!((p - q).abs() <= tol),
            (None, None) => {}
            other => panic!("a_norm_error presence differs: {other:?}"),
        }
    }
}

#[test]
fn seeded_poisson_matches_golden_log() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = golden_spec();
    s.out = Some(dir.path().to_path_buf());
    run_experiment(&s).unwrap();
    let got = read_csv(&dir.path().join("log.csv")).unwrap();
    let golden = read_csv(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_poisson_d3.csv")).unwrap();
    numeric_columns_match(&got, &golden, 1e-12);
}

#[test]
fn repeated_runs_are_deterministic() {
    let a = run_experiment(&golden_spec()).unwrap();
    let b = run_experiment(&golden_spec()).unwrap();
    let rows = |r: &tt_amen_cli::experiment::RunOutcome| r.log.records.iter().map(CsvRow::from).collect::<Vec<_>>();
    numeric_columns_match(&rows(&a), &rows(&b), 1e-12);
}

#[test]
fn schema_errors_list_every_offending_field() {
    let err = parse_spec(&Map::new(), &json!({"d": "three", "colour": 1, "solver": "cg"})).unwrap_err();
    let CliError::Schema(list) = &err else { panic!("{err}") };
    assert_eq!(list.len(), 3, "{list:?}");
    let err = parse_spec(&Map::new(), &json!({"tol": 0.0, "kickrank": 0, "problem": "custom"})).unwrap_err();
    let CliError::Schema(list) = &err else { panic!("{err}") };
    for field in ["tol", "kickrank", "matrix", "rhs"] {
        assert!(list.iter().any(|e| e.contains(field)), "{field} missing from {list:?}");
    }
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn spec_file_fields_override_flags() {
    let mut base = Map::new();
    base.insert("d".into(), json!(5));
    base.insert("tol".into(), json!(1e-3));
    let s = parse_spec(&base, &json!({"tol": 1e-7})).unwrap();
    assert_eq!((s.d, s.tol), (Some(5), 1e-7));
}

#[test]
fn poisson_run_meets_tolerance_against_dense_solution() {
    let run = run_experiment(&spec(json!({"d": 4, "n": 8, "tol": 1e-6, "reference": "dense"}))).unwrap();
    assert!(run.converged());
    let last = run.log.records.last().unwrap();
    assert!(last.rel_residual <= 1e-6);
    assert!(last.a_norm_error.unwrap() <= 1e-5);
}

#[test]
fn every_solver_runs_on_a_small_system() {
    for solver in ["amen_svd", "amen_chol", "amen_als", "als", "dmrg", "amen_sym"] {
        let run = run_experiment(&spec(json!({"d": 3, "n": 4, "tol": 1e-8, "solver": solver, "max_rank": 16}))).unwrap();
        assert!(run.converged(), "{solver}");
    }
}

#[test]
fn cme_problems_build_and_solve() {
    let step = run_experiment(&spec(json!({"problem": "cme", "d": 3, "n": 8, "tol": 1e-8, "reference": "dense"}))).unwrap();
    assert!(step.converged());
    assert!(step.log.records.last().unwrap().a_norm_error.unwrap() < 1e-6);
    let time =
        run_experiment(&spec(json!({"problem": "cme_time", "d": 2, "n": 4, "time_steps": 8, "horizon": 1.0, "tol": 1e-8, "reference": "tight"})))
            .unwrap();
    assert!(time.converged());
    assert_eq!(time.summary["diagnostics"]["problem"]["qtt"], true);
    assert!(time.log.records.last().unwrap().a_norm_error.unwrap() < 1e-5);
}

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use tt_amen_cli::diag::{run_check, Check};
use tt_amen_cli::experiment::{parse_spec, read_spec_file, ProblemKind, ReferenceKind, SolverName};
use tt_amen_cli::report::{log_to_csv, status_name, write_json};
use tt_amen_cli::{exit, run_experiments, CliError};

/// Tensor-train linear solvers (AMEn, ALS, DMRG) on benchmark problems.
#[derive(Parser)]
#[command(name = "tt-amen", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a problem, run a solver and write the convergence log.
    Solve(SolveArgs),
    /// Randomized checks of the convergence theory.
    Diag(DiagArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    solver: Option<SolverName>,
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    #[arg(long)]
    kickrank: Option<usize>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long)]
    max_rank: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for log.csv, summary.json and the solution.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Operator manifest for `--problem custom`.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Right-hand side manifest for `--problem custom`.
    #[arg(long)]
    rhs: Option<PathBuf>,
    #[arg(long, value_enum)]
    reference: Option<ReferenceKind>,
    /// Solve the normal equations.
    #[arg(long)]
    symmetrize: bool,
    /// JSON experiment (or array of experiments); its fields override the flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Experiments run concurrently.
    #[arg(long, env = "TT_AMEN_JOBS", default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct DiagArgs {
    #[arg(long, value_enum)]
    check: Check,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

// stdout may be a closed pipe; output is best effort
fn emit(line: String) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn flag_base(a: &SolveArgs) -> Map<String, Value> {
    let mut m = Map::new();
    let mut put = |k: &str, v: Value| {
        if !v.is_null() {
            m.insert(k.into(), v);
        }
    };
    put("problem", json!(a.problem));
    put("d", json!(a.d));
    put("n", json!(a.n));
    put("solver", json!(a.solver));
    put("tol", json!(a.tol));
    put("kickrank", json!(a.kickrank));
    put("max_sweeps", json!(a.max_sweeps));
    put("max_rank", json!(a.max_rank));
    put("seed", json!(a.seed));
    put("out", json!(a.out));
    put("matrix", json!(a.matrix));
    put("rhs", json!(a.rhs));
    put("reference", json!(a.reference));
    if a.symmetrize {
        put("symmetrize", json!(true));
    }
    m
}

fn solve(a: SolveArgs) -> Result<i32, CliError> {
    let base = flag_base(&a);
    let mut specs = match &a.spec {
        Some(p) => read_spec_file(p, &base)?,
        None => vec![parse_spec(&base, &Value::Null)?],
    };
    if specs.len() > 1 {
        // isolated output directories for batches sharing one --out
        for (i, s) in specs.iter_mut().enumerate() {
            if s.out.is_none() || s.out == a.out {
                s.out = a.out.as_ref().map(|o| o.join(format!("exp{i:03}")));
            }
        }
    }
    let mut code = exit::CONVERGED;
    for (i, r) in run_experiments(&specs, a.jobs).into_iter().enumerate() {
        match r {
            Ok(run) => {
                let last = run.log.records.last();
                emit(format!(
                    "experiment {i}: status={} sweeps={} rel_residual={} max_rank={} wall_time_s={}",
                    status_name(run.log.status),
                    run.log.sweeps(),
                    last.map_or("nan".into(), |r| format!("{:e}", r.rel_residual)),
                    run.x.max_rank(),
                    last.map_or("0".into(), |r| format!("{:.3}", r.wall_time)),
                ));
                for w in &run.log.warnings {
                    eprintln!("experiment {i}: warning: {w}");
                }
                if run.spec.out.is_none() {
                    emit(log_to_csv(&run.log).trim_end().to_string());
                }
                if !run.converged() {
                    code = code.max(exit::NOT_CONVERGED);
                }
            }
            Err(e) => {
                eprintln!("experiment {i}: error: {e}");
                code = code.max(e.exit_code());
            }
        }
    }
    Ok(code)
}

fn diag(a: DiagArgs) -> Result<i32, CliError> {
    let out = run_check(a.check, a.trials, a.seed)?;
    let mut report = out.report;
    report["passed"] = json!(out.passed);
    match &a.out {
        Some(p) => write_json(&report, p)?,
        None => emit(serde_json::to_string_pretty(&report).expect("json serializes")),
    }
    eprintln!("{:?}: {}", a.check, if out.passed { "PASS" } else { "FAIL" });
    Ok(if out.passed { exit::CONVERGED } else { exit::NOT_CONVERGED })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let r = match cli.cmd {
        Cmd::Solve(a) => solve(a),
        Cmd::Diag(a) => diag(a),
    };
    let code = r.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}

//! Experiment specs and the runner behind `tt-amen solve`.

use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::ValueEnum;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use tt_amen::amen::{als_solve, amen_solve, dmrg_solve, symmetrize, ConvergenceLog, EnrichmentMethod, LocalSolver, Monitor, SolverConfig};
use tt_amen::diagnostics::{a_norm, dense_oracle_solve, extreme_eigenvalues};
use tt_amen::problems::{
    build_cme_operator, build_cme_time_problem, build_initial_state, build_poisson, quantize_system, CascadeCmeSpec, PoissonSpec, TimeScheme,
    TimeSystemSpec,
};
use tt_amen::tt::{tt_add, tt_matvec, tt_norm};
use tt_amen::{TtMatrix, TtVector};

use crate::error::{CliError, Result};
use crate::io::{read_tt_matrix, read_tt_vector, write_tt_vector};
use crate::report::{summary_json, write_json, write_log};

/// Largest system solved densely for `--reference dense`.
pub const DENSE_REFERENCE_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Poisson,
    /// One time step of the cascade CME.
    Cme,
    /// All-at-once time system of the cascade CME.
    #[value(name = "cme_time")]
    CmeTime,
    /// Operator and right-hand side read from TT files.
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SolverName {
    #[value(name = "amen_svd")]
    AmenSvd,
    #[value(name = "amen_chol")]
    AmenChol,
    #[value(name = "amen_als")]
    AmenAls,
    Als,
    Dmrg,
    /// AMEn with SVD enrichment on the normal equations.
    #[value(name = "amen_sym")]
    AmenSym,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Dense,
    /// AMEn+SVD at `tol/1000`.
    Tight,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    #[value(name = "crank_nicolson")]
    CrankNicolson,
    #[value(name = "implicit_euler")]
    ImplicitEuler,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub problem: ProblemKind,
    pub solver: SolverName,
    /// Defaults to 16 for poisson and 20 for the CME problems.
    pub d: Option<usize>,
    /// Defaults to 64.
    pub n: Option<usize>,
    pub tol: f64,
    pub kickrank: usize,
    pub max_sweeps: usize,
    pub max_rank: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub rhs: Option<PathBuf>,
    pub reference: ReferenceKind,
    pub symmetrize: bool,
    pub alpha0: f64,
    pub delta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub horizon: f64,
    pub time_steps: usize,
    pub scheme: SchemeName,
    /// Quantize into binary modes; defaults to on when all sizes are powers of two.
    pub qtt: Option<bool>,
    pub qtt_tol: f64,
    pub dense_limit: usize,
    pub local_stop: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let cme = CascadeCmeSpec::default();
        ExperimentSpec {
            problem: ProblemKind::Poisson,
            solver: SolverName::AmenSvd,
            d: None,
            n: None,
            tol: 1e-5,
            kickrank: 4,
            max_sweeps: 20,
            max_rank: None,
            seed: 0,
            out: None,
            matrix: None,
            rhs: None,
            reference: ReferenceKind::None,
            symmetrize: false,
            alpha0: cme.alpha0,
            delta: cme.delta,
            beta: cme.beta,
            gamma: cme.gamma,
            horizon: 10.0,
            time_steps: 1 << 12,
            scheme: SchemeName::CrankNicolson,
            qtt: None,
            qtt_tol: 1e-12,
            dense_limit: 1500,
            local_stop: true,
        }
    }
}

fn known_fields() -> Vec<String> {
    match serde_json::to_value(ExperimentSpec::default()).expect("spec serializes") {
        Value::Object(m) => m.keys().cloned().collect(),
        _ => unreachable!(),
    }
}

/// Applies `overlay` on top of `base` and validates the result, reporting
/// every offending field at once.
pub fn parse_spec(base: &Map<String, Value>, overlay: &Value) -> Result<ExperimentSpec> {
    let mut merged = base.clone();
    match overlay {
        Value::Object(o) => merged.extend(o.iter().map(|(k, v)| (k.clone(), v.clone()))),
        Value::Null => {}
        _ => return Err(CliError::Schema(vec!["experiment must be a JSON object".into()])),
    }
    let known = known_fields();
    let mut errors = Vec::new();
    for (k, v) in &merged {
        if !known.contains(k) {
            errors.push(format!("unknown field `{k}`"));
        } else if let Err(e) = serde_json::from_value::<ExperimentSpec>(json!({ k: v })) {
            errors.push(format!("field `{k}`: {e}"));
        }
    }
    if !errors.is_empty() {
        return Err(CliError::Schema(errors));
    }
    let spec: ExperimentSpec = serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Schema(vec![e.to_string()]))?;
    spec.validate()?;
    Ok(spec)
}

/// Reads a spec file holding one experiment object or an array of them.
pub fn read_spec_file(path: &std::path::Path, base: &Map<String, Value>) -> Result<Vec<ExperimentSpec>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::format(path, format!("malformed JSON: {e}")))?;
    match value {
        Value::Array(items) => items.iter().map(|v| parse_spec(base, v)).collect(),
        v => Ok(vec![parse_spec(base, &v)?]),
    }
}

impl ExperimentSpec {
    pub fn dims(&self) -> (usize, usize) {
        let d = self.d.unwrap_or(match self.problem {
            ProblemKind::Poisson => 16,
            _ => 20,
        });
        (d, self.n.unwrap_or(64))
    }

    pub fn cme(&self) -> CascadeCmeSpec {
        let (d, n) = self.dims();
        CascadeCmeSpec { d, n, alpha0: self.alpha0, delta: self.delta, beta: self.beta, gamma: self.gamma }
    }

    pub fn time(&self) -> TimeSystemSpec {
        let scheme = match self.scheme {
            SchemeName::CrankNicolson => TimeScheme::CrankNicolson,
            SchemeName::ImplicitEuler => TimeScheme::ImplicitEuler,
        };
        TimeSystemSpec::over(self.horizon, self.time_steps, scheme)
    }

    fn wants_qtt(&self) -> bool {
        let (_, n) = self.dims();
        let pow2 = n.is_power_of_two() && (self.problem != ProblemKind::CmeTime || self.time_steps.is_power_of_two());
        self.qtt.unwrap_or(pow2)
    }

    pub fn validate(&self) -> Result<()> {
        let mut e = Vec::new();
        let (d, n) = self.dims();
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            e.push("field `tol`: must be positive".to_string());
        }
        if self.kickrank == 0 {
            e.push("field `kickrank`: must be at least 1".into());
        }
        if self.max_sweeps == 0 {
            e.push("field `max_sweeps`: must be at least 1".into());
        }
        if self.max_rank == Some(0) {
            e.push("field `max_rank`: must be at least 1".into());
        }
        if self.problem != ProblemKind::Custom {
            if d == 0 {
                e.push("field `d`: must be at least 1".into());
            }
            if n < 2 {
                e.push("field `n`: must be at least 2".into());
            }
        }
        if matches!(self.problem, ProblemKind::Cme | ProblemKind::CmeTime) {
            for (name, v) in [("alpha0", self.alpha0), ("delta", self.delta), ("beta", self.beta), ("gamma", self.gamma), ("horizon", self.horizon)] {
                if !(v > 0.0 && v.is_finite()) {
                    e.push(format!("field `{name}`: must be positive"));
                }
            }
            if self.time_steps == 0 {
                e.push("field `time_steps`: must be at least 1".into());
            }
            if self.qtt == Some(true) {
                if !n.is_power_of_two() {
                    e.push("field `n`: must be a power of two for qtt".into());
                }
                if self.problem == ProblemKind::CmeTime && !self.time_steps.is_power_of_two() {
                    e.push("field `time_steps`: must be a power of two for qtt".into());
                }
            }
        }
        if self.problem == ProblemKind::Poisson && self.qtt == Some(true) && !n.is_power_of_two() {
            e.push("field `n`: must be a power of two for qtt".into());
        }
        if !(self.qtt_tol >= 0.0) {
            e.push("field `qtt_tol`: must be non-negative".into());
        }
        if self.problem == ProblemKind::Custom {
            if self.matrix.is_none() {
                e.push("field `matrix`: required for the custom problem".into());
            }
            if self.rhs.is_none() {
                e.push("field `rhs`: required for the custom problem".into());
            }
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(CliError::Schema(e))
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let method = match self.solver {
            SolverName::AmenChol => EnrichmentMethod::Chol,
            SolverName::AmenAls => EnrichmentMethod::Als,
            _ => EnrichmentMethod::Svd,
        };
        let mut cfg = SolverConfig {
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            local_solver: LocalSolver::Auto { dense_limit: self.dense_limit },
            max_rank: self.max_rank,
            local_stop: self.local_stop,
            seed: self.seed,
            ..SolverConfig::default()
        }
        .with_method(method);
        cfg.enrichment.kickrank = self.kickrank;
        cfg
    }
}

/// A linear system ready for the solver.
pub struct BuiltProblem {
    pub a: TtMatrix,
    pub y: TtVector,
    pub description: Value,
}

pub fn build_problem(spec: &ExperimentSpec) -> Result<BuiltProblem> {
    let (d, n) = spec.dims();
    let qtt = spec.wants_qtt();
    let quantize = |a: TtMatrix, y: TtVector| -> Result<(TtMatrix, TtVector)> {
        if qtt {
            Ok(quantize_system(&a, &y, spec.qtt_tol)?)
        } else {
            Ok((a, y))
        }
    };
    let (a, y, description) = match spec.problem {
        ProblemKind::Poisson => {
            let (a, y) = build_poisson(&PoissonSpec { d, n })?;
            let (a, y) = if spec.qtt == Some(true) { quantize(a, y)? } else { (a, y) };
            (a, y, json!({ "problem": "poisson", "d": d, "n": n, "qtt": spec.qtt == Some(true) }))
        }
        ProblemKind::Cme => {
            let cme = spec.cme();
            cme.validate()?;
            let gen = build_cme_operator(&cme)?;
            let psi0 = build_initial_state(&vec![n; d])?;
            let tau = spec.horizon / spec.time_steps as f64;
            let eye = TtMatrix::identity(&vec![n; d])?;
            let (m, b) = match spec.scheme {
                SchemeName::CrankNicolson => {
                    let rhs = tt_matvec(&eye.add(&gen, 1.0, tau / 2.0)?.round(1e-14, None), &psi0)?;
                    (eye.add(&gen, 1.0, -tau / 2.0)?, rhs.round(0.0, None))
                }
                SchemeName::ImplicitEuler => (eye.add(&gen, 1.0, -tau)?, psi0),
            };
            let (a, y) = quantize(m.round(1e-14, None), b)?;
            (a, y, json!({ "problem": "cme", "d": d, "n": n, "tau": tau, "qtt": qtt }))
        }
        ProblemKind::CmeTime => {
            let cme = spec.cme();
            cme.validate()?;
            let p = build_cme_time_problem(&cme, &spec.time(), qtt.then_some(spec.qtt_tol))?;
            let desc = json!({
                "problem": "cme_time", "d": d, "n": n, "time_steps": spec.time_steps,
                "horizon": spec.horizon, "qtt": qtt, "physical_sizes": p.physical_sizes,
            });
            (p.operator, p.rhs, desc)
        }
        ProblemKind::Custom => {
            let a = read_tt_matrix(spec.matrix.as_ref().expect("validated"))?;
            let y = read_tt_vector(spec.rhs.as_ref().expect("validated"))?;
            if a.col_sizes() != y.mode_sizes() || !a.is_square() {
                return Err(CliError::Invalid(format!("matrix {:?}x{:?} does not match rhs {:?}", a.row_sizes(), a.col_sizes(), y.mode_sizes())));
            }
            (a, y, json!({ "problem": "custom" }))
        }
    };
    let mut description = description;
    description["mode_sizes"] = json!(a.col_sizes());
    description["operator_ranks"] = json!(a.ranks());
    Ok(BuiltProblem { a, y, description })
}

/// Error of the iterate against a reference solution.
pub enum Reference {
    None,
    /// Dense solution; the error is measured in the energy norm when the
    /// operator is SPD and in the Euclidean norm otherwise.
    Dense {
        a: Option<DMatrix<f64>>,
        xs: DVector<f64>,
    },
    Tight(TtVector),
}

impl Reference {
    pub fn error(&self, x: &TtVector) -> Option<f64> {
        match self {
            Reference::None => None,
            Reference::Dense { a, xs } => {
                let e = xs - DVector::from_vec(x.to_dense().ok()?);
                Some(match a {
                    Some(a) => a_norm(a, &e) / a_norm(a, xs),
                    None => e.norm() / xs.norm(),
                })
            }
            Reference::Tight(r) => Some(tt_norm(&tt_add(x, r, 1.0, -1.0).ok()?) / tt_norm(r)),
        }
    }

    pub fn norm_name(&self) -> Option<&'static str> {
        match self {
            Reference::None => None,
            Reference::Dense { a: Some(_), .. } => Some("energy"),
            _ => Some("euclidean"),
        }
    }
}

/// Wall clock plus reference error.
pub struct RunMonitor<'r> {
    start: Instant,
    reference: &'r Reference,
}

impl<'r> RunMonitor<'r> {
    pub fn new(reference: &'r Reference) -> Self {
        RunMonitor { start: Instant::now(), reference }
    }
}

impl Monitor for RunMonitor<'_> {
    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn error(&mut self, x: &TtVector) -> Option<f64> {
        self.reference.error(x)
    }
}

pub fn build_reference(spec: &ExperimentSpec, p: &BuiltProblem, warnings: &mut Vec<String>) -> Result<Reference> {
    match spec.reference {
        ReferenceKind::None => Ok(Reference::None),
        ReferenceKind::Dense => {
            let size: u128 = p.y.total_size();
            if size > DENSE_REFERENCE_CAP as u128 {
                return Err(CliError::Invalid(format!("dense reference needs at most {DENSE_REFERENCE_CAP} unknowns, the system has {size}")));
            }
            let ad = p.a.to_dense()?;
            let yd = DVector::from_vec(p.y.to_dense()?);
            let xs = dense_oracle_solve(&ad, &yd)?;
            let spd = extreme_eigenvalues(&ad).is_ok();
            Ok(Reference::Dense { a: spd.then_some(ad), xs })
        }
        ReferenceKind::Tight => {
            let mut cfg = spec.solver_config().with_method(EnrichmentMethod::Svd);
            cfg.tol = spec.tol / 1000.0;
            cfg.max_sweeps = cfg.max_sweeps.max(50);
            cfg.symmetrize = spec.symmetrize || spec.solver == SolverName::AmenSym;
            let (x, log) = amen_solve(&p.a, &p.y, None, &cfg, &mut tt_amen::amen::Silent)?;
            if !log.converged() {
                warnings.push(format!("tight reference stopped at residual {:e}", log.final_residual().unwrap_or(f64::NAN)));
            }
            Ok(Reference::Tight(x))
        }
    }
}

/// Runs the configured solver on a built problem.
pub fn solve(spec: &ExperimentSpec, a: &TtMatrix, y: &TtVector, monitor: &mut dyn Monitor) -> Result<(TtVector, ConvergenceLog)> {
    let cfg = spec.solver_config();
    let sym = spec.symmetrize || spec.solver == SolverName::AmenSym;
    let normal;
    let (a, y) = if sym {
        normal = symmetrize(a, y, None, None)?;
        (&normal.0, &normal.1)
    } else {
        (a, y)
    };
    Ok(match spec.solver {
        SolverName::AmenSvd | SolverName::AmenChol | SolverName::AmenAls | SolverName::AmenSym => amen_solve(a, y, None, &cfg, monitor)?,
        SolverName::Als => {
            let rank = spec.max_rank.unwrap_or(spec.kickrank);
            let sizes = a.col_sizes();
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let x0 = TtVector::random(&sizes, &vec![rank; sizes.len() - 1], &mut rng)?;
            als_solve(a, y, Some(&x0), &cfg, monitor)?
        }
        SolverName::Dmrg => dmrg_solve(a, y, None, &cfg, monitor)?,
    })
}

pub struct RunOutcome {
    pub spec: ExperimentSpec,
    pub x: TtVector,
    pub log: ConvergenceLog,
    pub summary: Value,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.log.converged()
    }
}

/// Builds the problem, computes the reference, runs the solver and writes
/// `log.csv`, `summary.json` and `solution.{json,bin}` into `spec.out`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunOutcome> {
    spec.validate()?;
    let problem = build_problem(spec)?;
    let mut warnings = Vec::new();
    let reference = build_reference(spec, &problem, &mut warnings)?;
    let mut monitor = RunMonitor::new(&reference);
    let (x, mut log) = solve(spec, &problem.a, &problem.y, &mut monitor)?;
    log.warnings.extend(warnings);
    let config = serde_json::to_value(spec).expect("spec serializes");
    let diagnostics = json!({
        "problem": problem.description,
        "error_norm": reference.norm_name(),
        "surrogate_rate_factors": true,
    });
    let summary = summary_json(&log, &x.ranks(), config, diagnostics);
    if let Some(out) = &spec.out {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        write_log(&log, &out.join("log.csv"))?;
        write_json(&summary, &out.join("summary.json"))?;
        write_tt_vector(&x, &out.join("solution.json"))?;
    }
    Ok(RunOutcome { spec: spec.clone(), x, log, summary })
}

/// Runs independent experiments on up to `jobs` threads. Results keep the
/// input order; each run owns its monitor and output directory.
pub fn run_experiments(specs: &[ExperimentSpec], jobs: usize) -> Vec<Result<RunOutcome>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunOutcome>>>> = specs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, specs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= specs.len() {
                    break;
                }
                let r = run_experiment(&specs[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("every slot filled")).collect()
}

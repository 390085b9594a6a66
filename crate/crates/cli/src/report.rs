//! Per-sweep CSV logs and JSON run summaries.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tt_amen::amen::{ConvergenceLog, Status, SweepRecord};

use crate::error::{CliError, Result};

pub const CSV_HEADER: [&str; 6] = ["sweep", "wall_time_s", "rel_residual", "a_norm_error", "max_rank", "local_converged"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub sweep: usize,
    pub wall_time_s: f64,
    pub rel_residual: f64,
    pub a_norm_error: Option<f64>,
    pub max_rank: usize,
    pub local_converged: bool,
}

impl From<&SweepRecord> for CsvRow {
    fn from(r: &SweepRecord) -> Self {
        CsvRow {
            sweep: r.sweep,
            wall_time_s: r.wall_time,
            rel_residual: r.rel_residual,
            a_norm_error: r.a_norm_error,
            max_rank: r.max_rank,
            local_converged: r.local_converged,
        }
    }
}

/// CSV text of a convergence log. An empty log gives the header alone.
pub fn log_to_csv(log: &ConvergenceLog) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in &log.records {
        w.serialize(CsvRow::from(r)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn write_log(log: &ConvergenceLog, path: &Path) -> Result<()> {
    fs::write(path, log_to_csv(log)).map_err(|e| CliError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::format(path, e.to_string()))?;
    let header: Vec<String> = r.headers().map_err(|e| CliError::format(path, e.to_string()))?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(CliError::format(path, format!("unexpected header {header:?}")));
    }
    r.deserialize().collect::<std::result::Result<Vec<CsvRow>, _>>().map_err(|e| CliError::format(path, e.to_string()))
}

pub fn status_name(s: Status) -> &'static str {
    match s {
        Status::Converged => "converged",
        Status::LocalConverged => "local_converged",
        Status::MaxSweeps => "max_sweeps",
    }
}

/// JSON record of a run: status, final numbers, the echoed config, the
/// per-core surrogate statistics and any diagnostics reports.
pub fn summary_json(log: &ConvergenceLog, ranks: &[usize], config: Value, diagnostics: Value) -> Value {
    let last = log.records.last();
    let sweeps: Vec<Value> = log
        .records
        .iter()
        .map(|r| {
            json!({
                "sweep": r.sweep,
                "rel_residual": r.rel_residual,
                "max_local_residual": r.max_local_residual,
                "cores": r.cores.iter().map(|c| json!({
                    "core": c.core,
                    "rank": c.rank,
                    "local_residual_before": c.local_residual_before,
                    "local_residual_after": c.local_residual_after,
                    "mu_surrogate": c.mu,
                    "omega_surrogate": c.omega,
                    "enrichment_width": c.enrichment_width,
                    "fallback": c.fallback,
                    "iterations": c.iterations,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "status": status_name(log.status),
        "converged": log.converged(),
        "sweeps": log.sweeps(),
        "final_rel_residual": last.map(|r| r.rel_residual),
        "final_a_norm_error": last.and_then(|r| r.a_norm_error),
        "wall_time_s": last.map(|r| r.wall_time),
        "ranks": ranks,
        "warnings": log.warnings,
        "notices": log.notices,
        "config": config,
        "diagnostics": diagnostics,
        "per_sweep": sweeps,
    })
}

pub fn write_json(value: &Value, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

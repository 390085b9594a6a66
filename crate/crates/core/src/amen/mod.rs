//! Alternating minimal energy solver with residual-based basis enrichment,
//! plus the fixed-rank one-site (ALS) and two-site (DMRG) baselines.
//!
//! All sweeps run left to right. Between sweeps the iterate is
//! right-orthogonalized and the environments are rebuilt.

mod config;
mod enrich;
mod env;
mod local;
mod sweep;

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DMatrix;

pub use config::{EnrichmentConfig, EnrichmentMethod, LocalSolver, SolutionTruncation, SolverConfig};
pub use enrich::{
    enrich_chol, enrich_svd, expand_and_orthogonalize, gram_chain, pivoted_cholesky, residual_first_block, residual_tail, svd_chain, AlsResidual,
    Enrichment,
};
pub use env::{assemble_local, build_environments, LocalOperator, OpEnv, SweepState};
pub use local::{local_residual, solve_local, solve_local_dense, truncate_local, LocalSolution, SplitSolution};
pub use sweep::{als_solve, amen_solve, amen_sweep, dmrg_solve, residual_norm, symmetrize, SweepContext};

use crate::tt::TtVector;

/// Per-core statistics of one sweep.
///
/// `mu` and `omega` are cheap surrogates, not the exact rate factors:
/// `mu` is the local residual after the update divided by the one before,
/// `omega` the relative part of the reduced residual missed by the
/// enrichment (absent for the ALS enrichment and the baselines).
#[derive(Clone, Debug, PartialEq)]
pub struct CoreStats {
    pub core: usize,
    pub rank: usize,
    pub local_residual_before: f64,
    pub local_residual_after: f64,
    pub mu: f64,
    pub omega: Option<f64>,
    pub enrichment_width: usize,
    pub fallback: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub sweep: usize,
    pub wall_time: f64,
    pub rel_residual: f64,
    pub a_norm_error: Option<f64>,
    pub max_rank: usize,
    pub local_converged: bool,
    pub max_local_residual: f64,
    pub cores: Vec<CoreStats>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    /// Global relative residual reached `tol`.
    Converged,
    /// Every pre-solve local residual of the last sweep was below `tol`.
    LocalConverged,
    /// `max_sweeps` exhausted; the last iterate is returned.
    MaxSweeps,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceLog {
    pub records: Vec<SweepRecord>,
    pub status: Status,
    pub warnings: Vec<String>,
    pub notices: Vec<String>,
}

impl ConvergenceLog {
    pub fn new() -> Self {
        ConvergenceLog { records: Vec::new(), status: Status::MaxSweeps, warnings: Vec::new(), notices: Vec::new() }
    }

    pub fn converged(&self) -> bool {
        self.status != Status::MaxSweeps
    }

    pub fn sweeps(&self) -> usize {
        self.records.len()
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.records.last().map(|r| r.rel_residual)
    }
}

impl Default for ConvergenceLog {
    fn default() -> Self {
        Self::new()
    }
}

/// Observer hooks. All methods default to no-ops, so a solver run without
/// a clock or reference solution costs nothing extra.
pub trait Monitor {
    /// Seconds since the run started.
    fn elapsed(&self) -> f64 {
        0.0
    }
    /// Error of the iterate against a reference, logged as `a_norm_error`.
    fn error(&mut self, _x: &TtVector) -> Option<f64> {
        None
    }
    /// Before core `k` is updated.
    fn before_update(&mut self, _k: usize, _x: &TtVector) {}
    /// After core `k` is updated, before enrichment.
    fn after_update(&mut self, _k: usize, _x: &TtVector) {}
    /// The enrichment block computed at core `k`.
    fn enrichment(&mut self, _k: usize, _z: &DMatrix<f64>) {}
    fn sweep_end(&mut self, _sweep: usize, _x: &TtVector) {}
}

/// Monitor that records nothing.
pub struct Silent;

impl Monitor for Silent {}

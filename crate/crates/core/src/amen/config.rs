use crate::{Result, TtError};

/// How the residual is approximated before expanding the basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnrichmentMethod {
    /// Truncated SVD of the first residual block against a right-orthogonal tail.
    Svd,
    /// Pivoted (unfinished) Cholesky of the residual Gram matrix.
    Chol,
    /// One alternating update of a rank-`ρ` residual approximant per step.
    Als,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnrichmentConfig {
    pub method: EnrichmentMethod,
    /// Number of enrichment vectors `ρ`.
    pub kickrank: usize,
    /// Relative tolerance below which residual directions are dropped
    /// (svd and chol only). Zero keeps `kickrank` vectors whenever possible.
    pub residual_tol: f64,
}

impl Default for EnrichmentConfig {
    fn default() -> Self {
        EnrichmentConfig { method: EnrichmentMethod::Svd, kickrank: 4, residual_tol: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LocalSolver {
    /// Direct when the local system has at most `dense_limit` unknowns,
    /// GMRES otherwise.
    Auto {
        dense_limit: usize,
    },
    Direct,
    /// GMRES; `rtol` defaults to `tol/10`.
    Iterative {
        max_iter: usize,
        rtol: Option<f64>,
        restart: usize,
    },
}

/// Truncation of the local solution before it is split off the core.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionTruncation {
    /// Keep the full local solution.
    None,
    /// Frobenius truncation at `tol/√d`.
    Frobenius,
    /// Frobenius start, then grow the rank until the local residual is met.
    Residual,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Target relative residual `‖y − Ax‖/‖y‖`.
    pub tol: f64,
    pub max_sweeps: usize,
    pub local_solver: LocalSolver,
    pub gmres_max_iter: usize,
    pub gmres_restart: usize,
    pub enrichment: EnrichmentConfig,
    pub truncation: SolutionTruncation,
    pub max_rank: Option<usize>,
    /// Solve the normal equations `AᵀA x = Aᵀy` instead.
    pub symmetrize: bool,
    /// Honor the local stopping rule (all pre-solve local residuals below `tol`).
    pub local_stop: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-5,
            max_sweeps: 20,
            local_solver: LocalSolver::Auto { dense_limit: 1500 },
            gmres_max_iter: 500,
            gmres_restart: 40,
            enrichment: EnrichmentConfig::default(),
            truncation: SolutionTruncation::Residual,
            max_rank: None,
            symmetrize: false,
            local_stop: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_method(mut self, method: EnrichmentMethod) -> Self {
        self.enrichment.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(TtError::InvalidArgument("tol must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(TtError::InvalidArgument("max_sweeps must be at least 1".into()));
        }
        if self.enrichment.kickrank == 0 {
            return Err(TtError::InvalidArgument("kickrank must be positive".into()));
        }
        if self.max_rank == Some(0) {
            return Err(TtError::InvalidArgument("max_rank must be positive".into()));
        }
        Ok(())
    }
}

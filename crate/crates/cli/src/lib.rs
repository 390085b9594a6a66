//! Experiment runner for the `tt-amen` solvers: problem specs, the TT file
//! format, CSV/JSON logs and the diagnostic checks behind the `tt-amen`
//! binary.

pub mod diag;
pub mod error;
pub mod experiment;
pub mod io;
pub mod report;

pub use error::{exit, CliError, Result};
pub use experiment::{run_experiment, run_experiments, ExperimentSpec};

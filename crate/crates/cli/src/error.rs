use std::path::PathBuf;

use thiserror::Error;
use tt_amen::TtError;

#[derive(Debug, Error)]
pub enum CliError {
    /// One entry per offending field.
    #[error("invalid experiment spec: {}", .0.join("; "))]
    Schema(Vec<String>),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(#[from] TtError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Format { path: path.into(), msg: msg.into() }
    }

    /// Process exit code: 3 for invalid input, 4 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => exit::IO,
            _ => exit::INVALID,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub mod exit {
    pub const CONVERGED: i32 = 0;
    pub const NOT_CONVERGED: i32 = 2;
    pub const INVALID: i32 = 3;
    pub const IO: i32 = 4;
}

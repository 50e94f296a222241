//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    InvalidArchitecture(String),

    #[error("{0}")]
    ShapeMismatch(String),

    #[error("{0}")]
    ContractViolation(String),

    #[error("{0}")]
    TrainingDiverged(String),

    #[error("dataset has no records")]
    EmptyDataset,

    #[error("{0}")]
    SingularCurve(String),

    #[error("{0}")]
    UndefinedCindex(String),

    #[error("{0}")]
    InvalidParameter(String),

    #[error("no convergence after {iterations} iterations (sup residual {sup_residual:e})")]
    NonConvergence { iterations: usize, sup_residual: f64 },

    #[error("{0}")]
    InsufficientSupport(String),

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Parse(String),

    #[error("{0}")]
    Schema(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-parsable kind used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArchitecture(_) => "invalid-architecture",
            Error::ShapeMismatch(_) => "shape",
            Error::ContractViolation(_) => "contract",
            Error::TrainingDiverged(_) => "diverged",
            Error::EmptyDataset => "empty-dataset",
            Error::SingularCurve(_) => "singular-curve",
            Error::UndefinedCindex(_) => "undefined-cindex",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::NonConvergence { .. } => "non-convergence",
            Error::InsufficientSupport(_) => "insufficient-support",
            Error::Config(_) => "config",
            Error::Usage(_) => "usage",
            Error::Parse(_) => "parse",
            Error::Schema(_) => "schema",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Process exit code for the CLI: 1 for usage/config mistakes, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 1,
            _ => 2,
        }
    }
}

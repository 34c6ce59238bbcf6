use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dangling {kind} reference: {id}")]
    DanglingReference { kind: &'static str, id: String },

    #[error("duplicate {kind} id: {id}")]
    DuplicateId { kind: &'static str, id: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("enumeration bound exceeded: {unknowns} unknown statements (limit {limit})")]
    EnumerationBound { unknowns: usize, limit: usize },

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("stratification impossible: {0}")]
    Stratification(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Short machine-readable tag used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } | Error::Json(_) => "parse",
            Error::DanglingReference { .. } => "dangling_reference",
            Error::DuplicateId { .. } => "duplicate_id",
            Error::Invalid(_) => "invalid",
            Error::EnumerationBound { .. } => "enumeration_bound",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Singular(_) => "singular",
            Error::Stratification(_) => "stratification",
        }
    }

    /// Process exit status for this error. Usage errors (exit 2) are produced
    /// by the argument parser before any of these can occur.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Parse { .. } | Error::Json(_) => 4,
            Error::DanglingReference { .. } | Error::DuplicateId { .. } | Error::Invalid(_) => 5,
            Error::EnumerationBound { .. } => 6,
            Error::NonConvergence { .. } | Error::Singular(_) => 7,
            Error::Stratification(_) => 8,
        }
    }
}

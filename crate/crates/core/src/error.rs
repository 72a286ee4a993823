use std::path::PathBuf;

use thiserror::Error;

use crate::sim::TrajectoryLog;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: max asymmetry {asymmetry:e} exceeds {tolerance:e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error(
        "matrix is not positive semi-definite: eigenvalue {eigenvalue:e} below -{tolerance:e}"
    )]
    PsdViolation { eigenvalue: f64, tolerance: f64 },

    #[error("matrix is not an orthogonal projector (residual {residual:e})")]
    NotProjector { residual: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {stage}")]
    NonFinite { stage: String },

    #[error("trajectory diverged at t = {t}: |x| = {norm:e}")]
    Diverged {
        t: f64,
        norm: f64,
        partial: Box<TrajectoryLog>,
    },

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("invalid value for `{key}`: {message}")]
    ConfigDomain { key: String, message: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigSyntax { .. } | Error::ConfigDomain { .. } | Error::UnknownScenario(_) => {
                2
            }
            Error::Diverged { .. } => 3,
            _ => 1,
        }
    }

    pub(crate) fn domain(key: &str, message: impl Into<String>) -> Self {
        Error::ConfigDomain {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

use qcollide_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("unknown preset '{0}' (expected one of: {known})", known = crate::presets::NAMES.join(", "))]
    UnknownPreset(String),

    #[error("t2 must be positive, got {0}")]
    NonpositiveT2(f64),

    #[error("t must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error(transparent)]
    Engine(#[from] CoreError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("writing JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad input, 3 when the numerics give up, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. }
            | CliError::UnknownPreset(_)
            | CliError::NonpositiveT2(_)
            | CliError::NegativeTime(_) => 2,
            CliError::Engine(e) => match e {
                CoreError::SolverFailure(_)
                | CoreError::Infeasible(_)
                | CoreError::IterationLimit { .. }
                | CoreError::MalformedProblem(_)
                | CoreError::CertificateInvalid(_)
                | CoreError::NotPure(_) => 3,
                _ => 2,
            },
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

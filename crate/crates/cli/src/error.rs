use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] sensorsched_core::Error),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Infeasible,
    ConfigError,
    NumericalFailure,
    Other,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Other => 1,
            Outcome::Infeasible => 2,
            Outcome::ConfigError => 3,
            Outcome::NumericalFailure => 4,
        }
    }
}

impl CliError {
    pub fn outcome(&self) -> Outcome {
        use sensorsched_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) => Outcome::ConfigError,
            CliError::Core(E::InvalidInput(_) | E::DimensionMismatch { .. }) => Outcome::ConfigError,
            CliError::Core(_) => Outcome::NumericalFailure,
            CliError::Io { .. } | CliError::Csv(_) => Outcome::Other,
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

use thiserror::Error;

/// Errors produced by the scheduling pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("integration diverged at t = {time}: {what} became non-finite")]
    Divergence { time: f64, what: &'static str },

    #[error("zero range on channel {channel}: measurement Jacobian undefined")]
    Singularity { channel: usize },

    #[error("matrix is not positive semidefinite ({context}): min eigenvalue {min_eigenvalue:e}")]
    NotPsd {
        context: &'static str,
        min_eigenvalue: f64,
    },

    #[error("process noise inconsistent at step {step}: min eigenvalue {min_eigenvalue:e} (grid too coarse?)")]
    NoiseInconsistency { step: usize, min_eigenvalue: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}

//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by samplers, models and data handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty minibatch")]
    EmptyBatch,

    #[error("minibatch index {index} out of range for dataset of size {n}")]
    BadIndex { index: usize, n: usize },

    #[error("chain diverged at step {step}: {what}")]
    ChainDiverged { step: u64, what: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

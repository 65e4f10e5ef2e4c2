//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the failure classes surfaced by the CLI:
/// configuration problems, malformed input data, numeric failures
/// during training, evaluation problems and plain I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad shapes, out-of-range hyperparameters,
    /// unknown config keys).
    #[error("configuration error: {0}")]
    Config(String),

    /// A line of an input file could not be parsed.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Input data violates a documented precondition.
    #[error("data error: {0}")]
    Data(String),

    /// A numeric computation produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Evaluation could not be carried out (e.g. NaN scores).
    #[error("evaluation error: {0}")]
    Eval(String),

    /// An artifact file has the wrong layout.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

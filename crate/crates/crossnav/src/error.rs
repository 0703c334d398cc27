//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or parameter shapes do not conform.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An action was not among the candidates offered at a state.
    #[error("invalid action: {0}")]
    InvalidAction(String),

    /// The agent's state does not lie on the demonstration path.
    #[error("viewpoint {0} is off the demonstration path")]
    OffPath(u32),

    /// World or episode generation could not satisfy its config.
    #[error("generation failed: {0}")]
    Generation(String),

    /// A computation produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Config text rejected, with the offending line number (1-based).
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    /// A persisted artifact (checkpoint, world file, trace) is inconsistent.
    #[error("integrity error: {0}")]
    Integrity(String),

    /// Malformed persisted text.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Error`]. Variants are
//! grouped by failure class so callers (notably the CLI) can map them onto
//! exit codes without string matching.

use thiserror::Error;

/// Alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two vectors that must have equal length do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A value violates a documented range or finiteness requirement.
    #[error("invalid value: {0}")]
    InvalidValue(String),

    /// An operation that needs at least one element received none.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Outcome sets or files that must share one observation sample do not.
    #[error("sample mismatch: {0}")]
    SampleMismatch(String),

    /// The same observation id appeared twice where ids must be unique.
    #[error("duplicate observation id: {0}")]
    DuplicateObservation(String),

    /// A record or candidate referenced an observation id that is not part
    /// of the sample.
    #[error("unknown observation id: {0}")]
    UnknownObservation(String),

    /// Training failed (non-finite loss, divergence).
    #[error("training failed: {0}")]
    Training(String),

    /// An iterative fit did not converge.
    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    /// A file had the wrong structure. `line` is 1-based; 0 means the
    /// problem is not tied to a single line.
    #[error("malformed file {path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidValue(msg.into())
    }

    pub(crate) fn format(path: &std::path::Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.display().to_string(),
            line,
            msg: msg.into(),
        }
    }
}

//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the completion, integration, transfer, and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs was violated (bad dimensions, NaN entries,
    /// out-of-range configuration values, malformed arguments).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two operands that must share dimensions do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The input is structurally valid but numerically degenerate
    /// (rank-deficient columns, all-zero design, vanishing spectrum).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A numeric routine failed to produce a finite result.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// An inference query falls outside the estimable range
    /// (the query vector has no component in the fitted representation).
    #[error("degenerate query: {0}")]
    DegenerateQuery(String),

    /// A text artifact could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

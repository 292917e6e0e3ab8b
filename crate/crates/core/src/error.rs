use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector must have at least one entry")]
    EmptyVector,

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A β formula hit a denominator whose magnitude is at or below the guard.
    #[error("degenerate denominator in {formula} beta formula")]
    DegenerateDenominator { formula: &'static str },

    #[error("no rate bound is available for {0}")]
    NoRateBound(String),

    #[error("satisfiability rate undefined: no executed iterations")]
    NoExecutedIterations,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

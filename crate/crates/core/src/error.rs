use thiserror::Error;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("index {0} appears more than once in a retry sequence")]
    DuplicateIndex(usize),
    #[error("item id {0} appears more than once in an action set")]
    DuplicateId(u64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite numeric input")]
    NonFinite,
    #[error("item {index} has norm {norm} > 1")]
    NormTooLarge { index: usize, norm: f64 },
    #[error("invalid reward profile: {0}")]
    InvalidProfile(&'static str),
    #[error("invalid feedback: {0}")]
    InvalidFeedback(&'static str),
    #[error("sequence length {len} exceeds budget {budget}")]
    BudgetExceeded { len: usize, budget: usize },
    #[error("projection direction is degenerate (x^T M^-1 x = {0})")]
    SingularDirection(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("instance too large for exhaustive search ({items} items, budget {budget})")]
    TooLarge { items: usize, budget: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("mixture fit failed: {0}")]
    Fit(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

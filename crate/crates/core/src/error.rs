use thiserror::Error;

/// Errors raised by sample validation and the inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sample is empty")]
    EmptySample,

    /// `index` is the 0-based position of the offending value in the input.
    #[error("non-finite value at position {index}")]
    NonFiniteValue { index: usize },

    #[error("index {index} out of range [0, {n}]")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    #[error("acceptance region is empty")]
    DegenerateRegion,

    #[error("numerical inconsistency: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not unitary (max |S†S - I| = {defect:e})")]
    NotUnitary { defect: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("Fock truncation of dimension {dim} exceeds the configured cap {cap}")]
    TruncationCap { dim: usize, cap: usize },

    #[error("conditioning event has zero probability")]
    ZeroProbabilityCondition,

    #[error("eigendecomposition failed to converge")]
    NoConvergence,
}

impl Error {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NotUnitary { .. } => "not_unitary",
            Error::InvalidState(_) => "invalid_state",
            Error::InvalidProbabilities(_) => "invalid_probabilities",
            Error::OutOfRange(_) => "out_of_range",
            Error::NonFinite => "non_finite",
            Error::TruncationCap { .. } => "truncation_cap",
            Error::ZeroProbabilityCondition => "zero_probability_condition",
            Error::NoConvergence => "no_convergence",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

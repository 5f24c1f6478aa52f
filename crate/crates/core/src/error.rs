use thiserror::Error;

/// Errors produced by the fitting, estimation, and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("incomplete relational array: {missing} of {expected} observations missing (first missing: {first})")]
    IncompleteData {
        missing: usize,
        expected: usize,
        first: String,
    },

    #[error("invalid dyad: {0}")]
    InvalidDyad(String),

    #[error("design matrix is rank deficient; dependent columns: {columns:?}")]
    SingularDesign { columns: Vec<usize> },

    #[error("at least {required} actors are required, got {actual}")]
    InsufficientActors { required: usize, actual: usize },

    #[error("at least {required} layers are required, got {actual}")]
    InsufficientLayers { required: usize, actual: usize },

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid residual matrix: {0}")]
    InvalidResiduals(String),

    #[error("covariance pattern is not invertible: {0}")]
    NotInvertible(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariate is not centered (sum = {sum})")]
    NotCentered { sum: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

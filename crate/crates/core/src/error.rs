use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: &'static str },

    #[error("negative residual diagonal {value:e} at pivot step {step}: input is not positive semidefinite")]
    NegativeDiagonal { step: usize, value: f64 },

    #[error("matrix is singular ({context})")]
    Singular { context: &'static str },

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("matrix is not symmetric (entry ({row}, {col}))")]
    NotSymmetric { row: usize, col: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid observations: {0}")]
    InvalidObservations(String),

    #[error("ensemble must have at least two members")]
    SingleMember,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("high-fidelity location {index} has no matching low-fidelity value")]
    MissingCommonPoints { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("oracle failed at candidate {index}: {message}")]
    OracleFailure { index: usize, message: String },

    #[error("no candidate points left for acquisition")]
    ExhaustedCandidates,
}

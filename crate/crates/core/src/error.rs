use nalgebra::DMatrix;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbVector(String),

    /// An escort map produced something that is not a probability vector.
    #[error("escort range error: {0}")]
    EscortRange(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// α = 1 is a dispatch boundary, never a numerical limit.
    #[error("α = 1 is not accepted by {operation}; use {use_instead} instead")]
    AlphaOne {
        operation: &'static str,
        use_instead: &'static str,
    },

    #[error("invalid convex generator `{name}`: {reason}")]
    Generator { name: String, reason: String },

    /// Eguchi extraction produced a matrix that is not positive definite even
    /// after the jitter retry.
    #[error("metric extraction failed ({reason}); raw matrix: {matrix}")]
    ExtractionFailure { reason: String, matrix: DMatrix<f64> },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("test point error: {0}")]
    TestPoints(String),

    #[error("configuration error: {0}")]
    Config(String),
}

//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An index vector referenced a row/column outside the matrix.
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    /// An index vector was empty or not strictly ascending.
    #[error("invalid index vector: {reason}")]
    BadIndexVector { reason: String },

    /// Vector/matrix dimensions do not line up.
    #[error("dimension mismatch: {context} (got {got}, expected {expected})")]
    DimensionMismatch {
        context: &'static str,
        got: usize,
        expected: usize,
    },

    /// A matrix expected to be positive definite failed factorization.
    /// `pivot` is the 1-based index of the offending pivot.
    #[error("matrix not positive definite: pivot {pivot} failed (value {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    /// A block required by a Schur-complement inversion was singular.
    #[error("singular {block} block in Schur inversion")]
    SingularBlock { block: &'static str },

    /// A triangular factor had a zero diagonal entry.
    #[error("singular triangular factor: zero diagonal at position {pos}")]
    SingularTriangular { pos: usize },

    /// The conditional covariance block of a fold could not be inverted.
    #[error("singular covariance block for fold {fold}")]
    FoldSingular { fold: usize },

    /// The trend design matrix (or its retained part for a fold) lost rank.
    #[error("trend basis rank-deficient{}", match .fold { Some(j) => format!(" when fold {j} is held out"), None => String::new() })]
    TrendRankDeficient { fold: Option<usize> },

    /// A fold partition failed validation.
    #[error("invalid fold partition: {0}")]
    InvalidPartition(String),

    /// A parameter value outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The model does not support the requested operation.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Relative error against a zero reference is undefined.
    #[error("relative error undefined: reference has zero norm")]
    ZeroReference,

    /// Every grid point of a criterion evaluation failed.
    #[error("optimization failed: all {failures} grid evaluations errored")]
    OptimizationFailed { failures: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

//! Distance computation and retrieval evaluation.

mod distance;
mod embedding;
mod pool;
mod rank;

pub use distance::{distance_matrix, naive_distance_matrix, DistanceMatrix, Metric};
pub use embedding::EmbeddingMatrix;
pub use pool::pool_tracklet_features;
pub use rank::{evaluate_rank, EvalOptions, EvalReport, Protocol, DEFAULT_REPEATS, REPORTED_RANKS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("embedding matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },
    #[error("zero-norm {side} row {row} under cosine distance")]
    ZeroNorm { side: &'static str, row: usize },
    #[error("max_rank must be at least 1")]
    InvalidMaxRank,
    #[error("repeats must be at least 1")]
    InvalidRepeats,
    #[error("no valid queries: every query lacks a cross-camera match in the gallery")]
    NoValidQueries,
    #[error("invalid tracklet bounds: {0}")]
    InvalidBounds(String),
    #[error("bad REMB file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

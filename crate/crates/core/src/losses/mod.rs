//! Training objectives with analytic gradients.
//!
//! Every loss is generic over the float type so the same code path can be
//! evaluated in `f32` for training and in `f64` for gradient checking.

mod combined;
mod cross_entropy;
mod triplet;

pub use combined::{combined_loss, CombinedLoss};
pub use cross_entropy::{cross_entropy_smooth, LogitsBatch, DEFAULT_EPSILON};
pub use triplet::{triplet_hard, EmbeddingBatch, DEFAULT_MARGIN};

use ndarray::Array2;
use thiserror::Error;

/// Scalar loss value and its gradient with respect to the input matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    pub value: T,
    pub grad: Array2<T>,
}

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("label smoothing epsilon {0} outside [0, 1)")]
    InvalidEpsilon(f64),
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("label {label} at row {row} outside [0, {classes})")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        classes: usize,
    },
    #[error("batch has {rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite input at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("label {0} has a single instance in the batch; batch-hard mining needs a positive")]
    SingletonLabel(u32),
    #[error("batch contains a single identity; batch-hard mining needs a negative")]
    SingleClass,
    #[error("loss weights must be non-negative and not both zero (got {0}, {1})")]
    InvalidWeights(f64, f64),
}

fn check_finite<T: num_traits::Float>(data: &Array2<T>) -> Result<(), LossError> {
    match data.indexed_iter().find(|(_, v)| !v.is_finite()) {
        Some(((row, col), _)) => Err(LossError::NonFinite { row, col }),
        None => Ok(()),
    }
}

//! Training and evaluation pipeline.

mod checkpoint;
mod data;
mod model;
mod optim;
mod scheduler;
mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointBundle, CHECKPOINT_VERSION};
pub use data::{TargetSet, TrainSet};
pub use model::{DifferentiableModel, ForwardOutput, LinearReIDModel, Param};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use scheduler::{LrSchedule, SchedulerState};
pub use trainer::{
    run_test_only, run_training, Engine, EngineConfig, EngineMode, EvalEntry, LogRecord,
    TrainingOutcome,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite gradient for parameter '{0}'; step aborted")]
    NonFiniteGradient(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("gradient/parameter mismatch: {0}")]
    Shape(String),
    #[error("failed to write checkpoint {path}: {source}")]
    CheckpointWrite {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint {path}: {message}")]
    CheckpointFormat { path: PathBuf, message: String },
    #[error("checkpoint does not match this configuration: {0}")]
    CheckpointMismatch(String),
    #[error(transparent)]
    Data(#[from] crate::dataman::DataError),
    #[error(transparent)]
    Loss(#[from] crate::losses::LossError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

//! Benchmarking engine for person re-identification.
//!
//! The crate is organised around the usual re-ID workflow:
//!
//! - [`dataman`]: dataset manifests, multi-source combination, samplers,
//!   augmentation and a synthetic data generator.
//! - [`metrics`]: embedding matrices, distance matrices and CMC/mAP evaluation.
//! - [`losses`]: label-smoothed cross-entropy and batch-hard triplet loss with
//!   analytic gradients.
//! - [`engine`]: optimizers, learning-rate schedules, checkpoints and the
//!   softmax/triplet training loops.
//! - [`viz`]: ranked-list and activation-map rendering.

pub mod dataman;
pub mod engine;
pub mod losses;
pub mod metrics;
pub mod viz;

pub use dataman::{DataError, DatasetSplit, Modality, Record};
pub use engine::EngineError;
pub use losses::LossError;
pub use metrics::{DistanceMatrix, EmbeddingMatrix, EvalReport, Metric, MetricsError, Protocol};
pub use viz::VizError;

//! Dataset manifests, multi-source combination, batch sampling, image
//! augmentation and synthetic data.

mod combine;
mod manifest;
mod record;
mod sampler;
mod synth;
mod transform;

pub use combine::combine_splits;
pub use manifest::{load_manifest, parse_manifest, save_manifest, serialize_manifest};
pub use record::{DatasetSplit, Modality, PersonRecord, Record, TestSegment, TrackletRecord};
pub use sampler::{make_batches, BatchIter, SamplerKind, SamplerSpec};
pub use synth::{feature_sidecars, generate_synthetic, SyntheticData, SyntheticSpec};
pub use transform::{apply_transforms, PixelBuffer, Transform, TransformSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("manifest parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("duplicate image reference '{image_ref}' in {partition}")]
    DuplicateRef {
        partition: String,
        image_ref: String,
    },
    #[error("{0} partition is empty")]
    EmptyPartition(&'static str),
    #[error("cannot combine an empty list of splits")]
    NoSources,
    #[error("cannot combine splits of different modalities ({0:?} and {1:?})")]
    MixedModality(Modality, Modality),
    #[error("random_identity sampling needs {needed} identities, only {available} available")]
    NotEnoughIdentities { needed: usize, available: usize },
    #[error("invalid sampler: {0}")]
    InvalidSampler(String),
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSynthetic(String),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

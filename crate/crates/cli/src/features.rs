use std::path::Path;

use anyhow::{bail, Context};
use reidbench::dataman::{feature_sidecars, load_manifest};
use reidbench::metrics::pool_tracklet_features;
use reidbench::{DatasetSplit, EmbeddingMatrix, Record};

pub fn load_remb(path: &Path) -> anyhow::Result<EmbeddingMatrix> {
    EmbeddingMatrix::load(path).with_context(|| format!("reading {}", path.display()))
}

/// One feature row per record. Accepts either one row per record or one row
/// per frame; per-frame rows are mean-pooled into tracklet features.
pub fn per_record(
    features: EmbeddingMatrix,
    records: &[Record],
    what: &str,
) -> anyhow::Result<EmbeddingMatrix> {
    if features.rows() == records.len() {
        return Ok(features);
    }
    let frames: usize = records.iter().map(Record::num_frames).sum();
    if features.rows() != frames {
        bail!(
            "{what}: {} feature rows, expected {} (records) or {frames} (frames)",
            features.rows(),
            records.len()
        );
    }
    let mut start = 0;
    let bounds: Vec<(usize, usize)> = records
        .iter()
        .map(|r| {
            let b = (start, start + r.num_frames());
            start = b.1;
            b
        })
        .collect();
    Ok(pool_tracklet_features(&features, &bounds)?)
}

/// A manifest with the per-record features of each partition.
pub struct FeatureSplit {
    pub split: DatasetSplit,
    pub train: EmbeddingMatrix,
    pub query: EmbeddingMatrix,
    pub gallery: EmbeddingMatrix,
}

impl FeatureSplit {
    pub fn dim(&self) -> usize {
        self.train.cols()
    }
}

/// Loads a manifest and its `.train/.query/.gallery.remb` sidecars.
pub fn load_feature_split(manifest: &Path) -> anyhow::Result<FeatureSplit> {
    let split =
        load_manifest(manifest).with_context(|| format!("loading {}", manifest.display()))?;
    let [train, query, gallery] = feature_sidecars(manifest);
    let name = manifest.display();
    let train = per_record(load_remb(&train)?, split.train(), &format!("{name} train"))?;
    let query = per_record(load_remb(&query)?, split.query(), &format!("{name} query"))?;
    let gallery = per_record(
        load_remb(&gallery)?,
        split.gallery(),
        &format!("{name} gallery"),
    )?;
    if query.cols() != train.cols() || gallery.cols() != train.cols() {
        bail!(
            "{name}: feature widths differ (train {}, query {}, gallery {})",
            train.cols(),
            query.cols(),
            gallery.cols()
        );
    }
    Ok(FeatureSplit {
        split,
        train,
        query,
        gallery,
    })
}

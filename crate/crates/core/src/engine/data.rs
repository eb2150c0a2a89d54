use crate::dataman::{DatasetSplit, Record};
use crate::metrics::EmbeddingMatrix;

use super::EngineError;

/// Training records with one input feature row per record.
#[derive(Debug, Clone)]
pub struct TrainSet {
    split: DatasetSplit,
    features: EmbeddingMatrix,
}

impl TrainSet {
    pub fn new(split: DatasetSplit, features: EmbeddingMatrix) -> Result<Self, EngineError> {
        if features.rows() != split.train().len() {
            return Err(EngineError::Config(format!(
                "{} train feature rows for {} train records",
                features.rows(),
                split.train().len()
            )));
        }
        Ok(Self { split, features })
    }

    pub fn split(&self) -> &DatasetSplit {
        &self.split
    }

    pub fn features(&self) -> &EmbeddingMatrix {
        &self.features
    }

    pub fn labels(&self) -> Vec<u32> {
        self.split.train().iter().map(Record::pid).collect()
    }
}

/// One evaluation dataset: query/gallery input features and their labels.
#[derive(Debug, Clone)]
pub struct TargetSet {
    pub dataset_tag: String,
    pub query: EmbeddingMatrix,
    pub gallery: EmbeddingMatrix,
    pub q_pids: Vec<u32>,
    pub q_camids: Vec<u32>,
    pub g_pids: Vec<u32>,
    pub g_camids: Vec<u32>,
}

impl TargetSet {
    /// One target per test segment of `split`; `query`/`gallery` hold the
    /// features of all query/gallery records of the split, in order.
    pub fn from_split(
        split: &DatasetSplit,
        query: &EmbeddingMatrix,
        gallery: &EmbeddingMatrix,
    ) -> Result<Vec<Self>, EngineError> {
        if query.rows() != split.query().len() || gallery.rows() != split.gallery().len() {
            return Err(EngineError::Config(format!(
                "feature rows ({} query, {} gallery) do not match records ({} query, {} gallery)",
                query.rows(),
                gallery.rows(),
                split.query().len(),
                split.gallery().len()
            )));
        }
        split
            .segments()
            .iter()
            .map(|seg| {
                let q_idx: Vec<usize> = seg.query.clone().collect();
                let g_idx: Vec<usize> = seg.gallery.clone().collect();
                let q = &split.query()[seg.query.clone()];
                let g = &split.gallery()[seg.gallery.clone()];
                Ok(Self {
                    dataset_tag: seg.dataset_tag.clone(),
                    query: query.select_rows(&q_idx)?,
                    gallery: gallery.select_rows(&g_idx)?,
                    q_pids: q.iter().map(Record::pid).collect(),
                    q_camids: q.iter().map(Record::camid).collect(),
                    g_pids: g.iter().map(Record::pid).collect(),
                    g_camids: g.iter().map(Record::camid).collect(),
                })
            })
            .collect()
    }
}

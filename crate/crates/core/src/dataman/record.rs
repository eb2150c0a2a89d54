use std::collections::{BTreeMap, HashSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Image,
    Video,
}

/// One still image of one person seen by one camera.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonRecord {
    pub image_ref: String,
    pub pid: u32,
    pub camid: u32,
    pub dataset_tag: String,
}

/// An ordered frame sequence of one person from one camera.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackletRecord {
    pub image_refs: Vec<String>,
    pub pid: u32,
    pub camid: u32,
    pub dataset_tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    Image(PersonRecord),
    Video(TrackletRecord),
}

impl Record {
    pub fn image(
        image_ref: impl Into<String>,
        pid: u32,
        camid: u32,
        tag: impl Into<String>,
    ) -> Self {
        Self::Image(PersonRecord {
            image_ref: image_ref.into(),
            pid,
            camid,
            dataset_tag: tag.into(),
        })
    }

    pub fn tracklet(image_refs: Vec<String>, pid: u32, camid: u32, tag: impl Into<String>) -> Self {
        Self::Video(TrackletRecord {
            image_refs,
            pid,
            camid,
            dataset_tag: tag.into(),
        })
    }

    pub fn modality(&self) -> Modality {
        match self {
            Self::Image(_) => Modality::Image,
            Self::Video(_) => Modality::Video,
        }
    }

    pub fn pid(&self) -> u32 {
        match self {
            Self::Image(r) => r.pid,
            Self::Video(r) => r.pid,
        }
    }

    pub fn camid(&self) -> u32 {
        match self {
            Self::Image(r) => r.camid,
            Self::Video(r) => r.camid,
        }
    }

    pub fn dataset_tag(&self) -> &str {
        match self {
            Self::Image(r) => &r.dataset_tag,
            Self::Video(r) => &r.dataset_tag,
        }
    }

    /// All frame references; a single element for image records.
    pub fn refs(&self) -> &[String] {
        match self {
            Self::Image(r) => std::slice::from_ref(&r.image_ref),
            Self::Video(r) => &r.image_refs,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.refs().len()
    }

    pub fn with_labels(&self, pid: u32, camid: u32) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Image(r) => {
                r.pid = pid;
                r.camid = camid;
            }
            Self::Video(r) => {
                r.pid = pid;
                r.camid = camid;
            }
        }
        out
    }
}

/// Query/gallery ranges belonging to one evaluation dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSegment {
    pub dataset_tag: String,
    pub query: Range<usize>,
    pub gallery: Range<usize>,
}

/// Train/query/gallery partitions of one dataset or of several combined ones.
///
/// Train pids are always contiguous `0..num_train_pids`; query and gallery
/// labels keep their original values. `num_train_cams` is one past the
/// largest train camid, so camera offsets applied when combining never
/// overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    modality: Modality,
    train: Vec<Record>,
    query: Vec<Record>,
    gallery: Vec<Record>,
    num_train_pids: usize,
    num_train_cams: usize,
    train_pid_origin: Vec<u32>,
    segments: Vec<TestSegment>,
}

impl DatasetSplit {
    /// Validates the partitions and relabels train pids to `0..n` in
    /// ascending order of the original pid.
    pub fn new(
        dataset_tag: &str,
        modality: Modality,
        train: Vec<Record>,
        query: Vec<Record>,
        gallery: Vec<Record>,
    ) -> Result<Self, DataError> {
        if dataset_tag.is_empty() {
            return Err(DataError::Validation {
                field: "dataset_tag".into(),
                message: "must be non-empty".into(),
            });
        }
        for (name, part) in [("train", &train), ("query", &query), ("gallery", &gallery)] {
            validate_partition(name, part, modality)?;
        }

        let origins: Vec<u32> = train
            .iter()
            .map(Record::pid)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let relabel: BTreeMap<u32, u32> = origins
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new as u32))
            .collect();
        let train: Vec<Record> = train
            .iter()
            .map(|r| r.with_labels(relabel[&r.pid()], r.camid()))
            .collect();
        let num_train_cams = train
            .iter()
            .map(|r| r.camid() as usize + 1)
            .max()
            .unwrap_or(0);

        let segments = vec![TestSegment {
            dataset_tag: dataset_tag.to_owned(),
            query: 0..query.len(),
            gallery: 0..gallery.len(),
        }];
        Ok(Self {
            modality,
            num_train_pids: origins.len(),
            num_train_cams,
            train,
            query,
            gallery,
            train_pid_origin: origins,
            segments,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub(super) fn from_parts(
        modality: Modality,
        train: Vec<Record>,
        query: Vec<Record>,
        gallery: Vec<Record>,
        num_train_pids: usize,
        num_train_cams: usize,
        train_pid_origin: Vec<u32>,
        segments: Vec<TestSegment>,
    ) -> Self {
        Self {
            modality,
            train,
            query,
            gallery,
            num_train_pids,
            num_train_cams,
            train_pid_origin,
            segments,
        }
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn train(&self) -> &[Record] {
        &self.train
    }

    pub fn query(&self) -> &[Record] {
        &self.query
    }

    pub fn gallery(&self) -> &[Record] {
        &self.gallery
    }

    pub fn num_train_pids(&self) -> usize {
        self.num_train_pids
    }

    pub fn num_train_cams(&self) -> usize {
        self.num_train_cams
    }

    /// Original pid of each relabeled train pid.
    pub fn train_pid_origin(&self) -> &[u32] {
        &self.train_pid_origin
    }

    /// Per-dataset query/gallery ranges, one per source for combined splits.
    pub fn segments(&self) -> &[TestSegment] {
        &self.segments
    }

    /// Tag of the first (for single datasets, the only) segment.
    pub fn dataset_tag(&self) -> &str {
        &self.segments[0].dataset_tag
    }

    pub fn distinct_pids(part: &[Record]) -> usize {
        part.iter().map(Record::pid).collect::<HashSet<_>>().len()
    }

    pub fn distinct_cams(part: &[Record]) -> usize {
        part.iter().map(Record::camid).collect::<HashSet<_>>().len()
    }
}

fn validate_partition(
    name: &'static str,
    part: &[Record],
    modality: Modality,
) -> Result<(), DataError> {
    if part.is_empty() {
        return Err(DataError::EmptyPartition(name));
    }
    let mut seen = HashSet::new();
    for (i, r) in part.iter().enumerate() {
        if r.modality() != modality {
            return Err(DataError::Validation {
                field: format!("{name}[{i}]"),
                message: format!("{:?} record in a {:?} split", r.modality(), modality),
            });
        }
        if r.dataset_tag().is_empty() {
            return Err(DataError::Validation {
                field: format!("{name}[{i}].dataset_tag"),
                message: "must be non-empty".into(),
            });
        }
        if r.refs().is_empty() {
            return Err(DataError::Validation {
                field: format!("{name}[{i}].paths"),
                message: "tracklet needs at least one frame".into(),
            });
        }
        let key = r.refs().join("\n");
        if !seen.insert(key) {
            return Err(DataError::DuplicateRef {
                partition: name.to_owned(),
                image_ref: r.refs().join(","),
            });
        }
    }
    Ok(())
}

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{save_manifest, DataError, DatasetSplit, Modality, Record};
use crate::metrics::EmbeddingMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_pids: usize,
    pub cams: usize,
    pub instances_per_pid_per_cam: usize,
    pub embed_dim: usize,
    pub cluster_noise: f64,
    pub seed: u64,
    #[serde(default = "default_tag")]
    pub dataset_tag: String,
}

fn default_tag() -> String {
    "synthetic".into()
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_pids: 20,
            cams: 2,
            instances_per_pid_per_cam: 4,
            embed_dim: 64,
            cluster_noise: 0.05,
            seed: 0,
            dataset_tag: default_tag(),
        }
    }
}

/// A generated split plus one feature row per record of each partition.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub split: DatasetSplit,
    pub train: EmbeddingMatrix,
    pub query: EmbeddingMatrix,
    pub gallery: EmbeddingMatrix,
}

impl SyntheticData {
    /// Writes `<name>.json` and the three `.remb` sidecars into `dir`,
    /// returning the manifest path.
    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf, DataError> {
        std::fs::create_dir_all(dir)?;
        let manifest = dir.join(format!("{name}.json"));
        save_manifest(&self.split, &manifest)?;
        let [train, query, gallery] = feature_sidecars(&manifest);
        self.train.save(train)?;
        self.query.save(query)?;
        self.gallery.save(gallery)?;
        Ok(manifest)
    }
}

/// Feature files that accompany a manifest: `<stem>.train.remb`,
/// `<stem>.query.remb` and `<stem>.gallery.remb`, next to it.
pub fn feature_sidecars(manifest: &Path) -> [PathBuf; 3] {
    let stem = manifest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let dir = manifest.parent().unwrap_or_else(|| Path::new(""));
    ["train", "query", "gallery"].map(|part| dir.join(format!("{stem}.{part}.remb")))
}

/// Gaussian identity clusters.
///
/// The first `num_pids / 2` identities form the training set; the rest are
/// held out for query/gallery. Every identity gets
/// `cams * instances_per_pid_per_cam` records. For held-out identities,
/// instance 0 of each camera goes to the query set and the remaining
/// instances to the gallery.
///
/// Cluster centres are drawn from `N(0, I / embed_dim)` (unit expected
/// norm); each record adds `N(0, cluster_noise^2 I / embed_dim)` noise, so
/// `cluster_noise` is the expected noise norm relative to the centre norm.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, DataError> {
    if spec.num_pids < 2 {
        return Err(DataError::InvalidSynthetic(
            "num_pids must be at least 2".into(),
        ));
    }
    if spec.cams < 2 {
        return Err(DataError::InvalidSynthetic(
            "cams must be at least 2 for cross-camera matching".into(),
        ));
    }
    if spec.instances_per_pid_per_cam < 2 {
        return Err(DataError::InvalidSynthetic(
            "instances_per_pid_per_cam must be at least 2 (one query, one gallery)".into(),
        ));
    }
    if spec.embed_dim == 0 {
        return Err(DataError::InvalidSynthetic(
            "embed_dim must be positive".into(),
        ));
    }
    if !(spec.cluster_noise >= 0.0 && spec.cluster_noise.is_finite()) {
        return Err(DataError::InvalidSynthetic(
            "cluster_noise must be finite and >= 0".into(),
        ));
    }

    let d = spec.embed_dim;
    let scale = 1.0 / (d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.num_pids)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * scale
                })
                .collect::<Vec<f64>>()
        })
        .collect();

    let tag = spec.dataset_tag.as_str();
    let num_train = spec.num_pids / 2;
    let mut parts: [(Vec<Record>, Vec<f32>); 3] = Default::default();
    for (pid, center) in centers.iter().enumerate() {
        for cam in 0..spec.cams {
            for inst in 0..spec.instances_per_pid_per_cam {
                let slot = match (pid < num_train, inst) {
                    (true, _) => 0,
                    (false, 0) => 1,
                    (false, _) => 2,
                };
                let name = ["train", "query", "gallery"][slot];
                let path = format!("{tag}/{name}/p{pid:04}_c{cam}_{inst:03}.png");
                let (records, rows) = &mut parts[slot];
                records.push(Record::image(path, pid as u32, cam as u32, tag));
                for &c in center {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    rows.push((c + noise * spec.cluster_noise * scale) as f32);
                }
            }
        }
    }

    let [(train, train_rows), (query, query_rows), (gallery, gallery_rows)] = parts;
    let matrix = |rows: Vec<f32>| -> Result<EmbeddingMatrix, DataError> {
        let n = rows.len() / d;
        Ok(EmbeddingMatrix::new(
            Array2::from_shape_vec((n, d), rows).expect("row-major buffer"),
        )?)
    };
    let split = DatasetSplit::new(tag, Modality::Image, train, query, gallery)?;
    Ok(SyntheticData {
        split,
        train: matrix(train_rows)?,
        query: matrix(query_rows)?,
        gallery: matrix(gallery_rows)?,
    })
}

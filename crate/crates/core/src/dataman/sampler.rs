use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, DatasetSplit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    #[default]
    Random,
    Sequential,
    /// P identities times K instances per batch.
    RandomIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub batch_size: usize,
    #[serde(default = "default_instances")]
    pub num_instances: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_instances() -> usize {
    4
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Random,
            batch_size: 32,
            num_instances: default_instances(),
            seed: 0,
        }
    }
}

impl SamplerSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.batch_size == 0 {
            return Err(DataError::InvalidSampler(
                "batch_size must be positive".into(),
            ));
        }
        if self.kind == SamplerKind::RandomIdentity {
            if self.num_instances < 2 {
                return Err(DataError::InvalidSampler(
                    "num_instances must be at least 2".into(),
                ));
            }
            if !self.batch_size.is_multiple_of(self.num_instances) {
                return Err(DataError::InvalidSampler(format!(
                    "batch_size {} is not a multiple of num_instances {}",
                    self.batch_size, self.num_instances
                )));
            }
        }
        Ok(())
    }

    /// Identities per batch for [`SamplerKind::RandomIdentity`].
    pub fn num_identities(&self) -> usize {
        self.batch_size / self.num_instances.max(1)
    }
}

/// Batches of train-record indices for one pass over the data.
#[derive(Debug, Clone)]
pub struct BatchIter {
    batches: std::vec::IntoIter<Vec<usize>>,
}

impl Iterator for BatchIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Self::Item> {
        self.batches.next()
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.batches.size_hint()
    }
}

impl ExactSizeIterator for BatchIter {}

/// Builds one epoch of batches over `split.train()`.
///
/// The batch sequence is a pure function of the split and `spec` (including
/// its seed).
pub fn make_batches(split: &DatasetSplit, spec: &SamplerSpec) -> Result<BatchIter, DataError> {
    spec.validate()?;
    let n = split.train().len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let batches = match spec.kind {
        SamplerKind::Sequential => chunk((0..n).collect(), spec.batch_size),
        SamplerKind::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            chunk(order, spec.batch_size)
        }
        SamplerKind::RandomIdentity => random_identity(split, spec, &mut rng)?,
    };
    Ok(BatchIter {
        batches: batches.into_iter(),
    })
}

fn chunk(order: Vec<usize>, size: usize) -> Vec<Vec<usize>> {
    order.chunks(size).map(<[usize]>::to_vec).collect()
}

fn random_identity(
    split: &DatasetSplit,
    spec: &SamplerSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>, DataError> {
    let k = spec.num_instances;
    let p = spec.num_identities();

    let mut by_pid: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, r) in split.train().iter().enumerate() {
        by_pid.entry(r.pid()).or_default().push(i);
    }
    if by_pid.len() < p {
        return Err(DataError::NotEnoughIdentities {
            needed: p,
            available: by_pid.len(),
        });
    }

    // Per identity: a shuffled list of K-sized groups, consumed front to back.
    let mut groups: BTreeMap<u32, Vec<Vec<usize>>> = BTreeMap::new();
    for (pid, mut idxs) in by_pid {
        if idxs.len() < k {
            idxs = (0..k).map(|_| idxs[rng.gen_range(0..idxs.len())]).collect();
        }
        idxs.shuffle(rng);
        let mut chunks: Vec<Vec<usize>> = idxs.chunks_exact(k).map(<[usize]>::to_vec).collect();
        chunks.reverse();
        groups.insert(pid, chunks);
    }

    let mut available: Vec<u32> = groups.keys().copied().collect();
    let mut batches = Vec::new();
    while available.len() >= p {
        let selected: Vec<u32> = available.choose_multiple(rng, p).copied().collect();
        let mut batch = Vec::with_capacity(spec.batch_size);
        for pid in selected {
            let pid_groups = groups.get_mut(&pid).expect("selected pid has groups");
            batch.extend(pid_groups.pop().expect("available pid has a group"));
            if pid_groups.is_empty() {
                available.retain(|&x| x != pid);
            }
        }
        batches.push(batch);
    }
    Ok(batches)
}

//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use ndarray::{Array2, Array3, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::collections::BTreeSet;

use reidbench::dataman::{combine_splits, SamplerKind, SamplerSpec, SyntheticData};
use reidbench::engine::{
    DifferentiableModel, EngineConfig, EngineMode, LinearReIDModel, OptimizerConfig, OptimizerKind,
    OptimizerState, SchedulerState, TargetSet, TrainSet,
};
use reidbench::{DatasetSplit, Modality, Record};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard-protocol CMC and mAP from fully sorted ranked lists.
pub struct OracleReport {
    pub cmc: Vec<f64>,
    pub map: f64,
    pub per_query_ap: Vec<f64>,
    pub num_valid: usize,
}

pub fn oracle_evaluate(
    dist: ArrayView2<'_, f32>,
    q_pids: &[u32],
    q_camids: &[u32],
    g_pids: &[u32],
    g_camids: &[u32],
    max_rank: usize,
) -> Option<OracleReport> {
    let cmc_len = max_rank.min(dist.ncols());
    let mut cmc_sum = vec![0.0f64; cmc_len];
    let mut aps = Vec::new();
    for q in 0..dist.nrows() {
        let row = dist.row(q);
        let mut order: Vec<usize> = (0..dist.ncols()).collect();
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let matches: Vec<bool> = order
            .into_iter()
            .filter(|&j| !(g_pids[j] == q_pids[q] && g_camids[j] == q_camids[q]))
            .map(|j| g_pids[j] == q_pids[q])
            .collect();
        if !matches.contains(&true) {
            continue;
        }
        let first = matches.iter().position(|&m| m).unwrap();
        for (k, c) in cmc_sum.iter_mut().enumerate() {
            if first <= k {
                *c += 1.0;
            }
        }
        let mut hits = 0usize;
        let mut precision_sum = 0.0f64;
        for (pos, &m) in matches.iter().enumerate() {
            if m {
                hits += 1;
                precision_sum += hits as f64 / (pos + 1) as f64;
            }
        }
        aps.push(precision_sum / hits as f64);
    }
    if aps.is_empty() {
        return None;
    }
    let n = aps.len() as f64;
    Some(OracleReport {
        cmc: cmc_sum.iter().map(|c| c / n).collect(),
        map: aps.iter().sum::<f64>() / n,
        num_valid: aps.len(),
        per_query_ap: aps,
    })
}

/// Random distance matrix with all entries distinct, plus labels that
/// guarantee a mix of valid and same-camera-only queries.
pub struct RankInstance {
    pub dist: Array2<f32>,
    pub q_pids: Vec<u32>,
    pub q_camids: Vec<u32>,
    pub g_pids: Vec<u32>,
    pub g_camids: Vec<u32>,
}

pub fn random_rank_instance(r: &mut impl Rng, max_q: usize, max_g: usize) -> RankInstance {
    let nq = r.gen_range(1..=max_q);
    let ng = r.gen_range(2..=max_g);
    let pids = r.gen_range(1..=ng.min(20)) as u32;
    let cams = r.gen_range(1..=4u32);
    // Distinct values: a shuffled ramp of integers, exactly representable in f32.
    let mut values: Vec<f32> = (0..nq * ng).map(|v| v as f32).collect();
    for i in (1..values.len()).rev() {
        let j = r.gen_range(0..=i);
        values.swap(i, j);
    }
    let mut inst = RankInstance {
        dist: Array2::from_shape_vec((nq, ng), values).unwrap(),
        q_pids: (0..nq).map(|_| r.gen_range(0..pids)).collect(),
        q_camids: (0..nq).map(|_| r.gen_range(0..cams)).collect(),
        g_pids: (0..ng).map(|_| r.gen_range(0..pids)).collect(),
        g_camids: (0..ng).map(|_| r.gen_range(0..cams)).collect(),
    };
    // Ensure at least one valid query.
    inst.g_pids[0] = inst.q_pids[0];
    inst.g_camids[0] = inst.q_camids[0] + 1;
    inst
}

pub fn naive_sq_euclidean(q: ArrayView2<'_, f32>, g: ArrayView2<'_, f32>) -> Array2<f64> {
    Array2::from_shape_fn((q.nrows(), g.nrows()), |(i, j)| {
        q.row(i)
            .iter()
            .zip(g.row(j))
            .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
            .sum()
    })
}

pub fn naive_cosine(q: ArrayView2<'_, f32>, g: ArrayView2<'_, f32>) -> Array2<f64> {
    let norm =
        |v: ndarray::ArrayView1<'_, f32>| v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    Array2::from_shape_fn((q.nrows(), g.nrows()), |(i, j)| {
        let dot: f64 = q
            .row(i)
            .iter()
            .zip(g.row(j))
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum();
        1.0 - dot / (norm(q.row(i)) * norm(g.row(j)))
    })
}

/// Direct evaluation of the activation-map formula in f64.
pub fn oracle_activation(f: &Array3<f32>) -> Array2<f64> {
    let (c, h, w) = f.dim();
    let mut a = Array2::<f64>::zeros((h, w));
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                a[[y, x]] += (f[[ch, y, x]] as f64).abs();
            }
        }
    }
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    a / norm
}

/// Label-smoothed cross-entropy, written out term by term.
pub fn oracle_cross_entropy(logits: &Array2<f64>, labels: &[usize], eps: f64) -> f64 {
    let (b, k) = logits.dim();
    let mut total = 0.0;
    for (row, &label) in logits.outer_iter().zip(labels) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for (c, &z) in row.iter().enumerate() {
            let t = if c == label {
                1.0 - eps + eps / k as f64
            } else {
                eps / k as f64
            };
            total -= t * (z - lse);
        }
    }
    total / b as f64
}

pub fn pair_distance(x: &Array2<f64>, i: usize, j: usize) -> f64 {
    x.row(i)
        .iter()
        .zip(x.row(j))
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Batch-hard triplet loss, written out with explicit loops.
pub fn oracle_triplet(x: &Array2<f64>, labels: &[u32], margin: f64) -> f64 {
    let b = x.nrows();
    let mut total = 0.0;
    for a in 0..b {
        let mut hardest_pos = f64::NEG_INFINITY;
        let mut hardest_neg = f64::INFINITY;
        for j in 0..b {
            let d = pair_distance(x, a, j);
            if labels[j] == labels[a] {
                hardest_pos = hardest_pos.max(d);
            } else {
                hardest_neg = hardest_neg.min(d);
            }
        }
        total += (hardest_pos - hardest_neg + margin).max(0.0);
    }
    total / b as f64
}

/// How far a batch is from the points where batch-hard triplet loss is not
/// smooth: ties between the hardest and next-hardest positive or negative,
/// a hinge at exactly zero, or a selected distance near zero (where the
/// norm is singular). Returns `(tie_or_hinge_gap, smallest_selected_distance)`.
/// Finite differences are only meaningful when both are well above the
/// step size.
pub fn triplet_kink_distance(x: &Array2<f64>, labels: &[u32], margin: f64) -> (f64, f64) {
    let b = x.nrows();
    let mut gap = f64::INFINITY;
    let mut nearest = f64::INFINITY;
    for a in 0..b {
        let mut pos: Vec<f64> = Vec::new();
        let mut neg: Vec<f64> = Vec::new();
        for j in 0..b {
            let d = pair_distance(x, a, j);
            if j == a {
                continue;
            }
            if labels[j] == labels[a] {
                pos.push(d);
            } else {
                neg.push(d);
            }
        }
        pos.sort_by(|u, v| v.total_cmp(u));
        neg.sort_by(|u, v| u.total_cmp(v));
        nearest = nearest.min(pos[0]).min(neg[0]);
        if pos.len() > 1 {
            gap = gap.min(pos[0] - pos[1]);
        }
        if neg.len() > 1 {
            gap = gap.min(neg[1] - neg[0]);
        }
        gap = gap.min((pos[0] - neg[0] + margin).abs());
    }
    (gap, nearest)
}

/// Softmax-mode settings: adam lr 3e-4, single step every 20 epochs,
/// 60 epochs, batch 32, label smoothing on.
pub fn softmax_setup() -> (EngineConfig, SamplerSpec, OptimizerConfig, SchedulerState) {
    let config = EngineConfig {
        mode: EngineMode::Softmax,
        max_epoch: 60,
        eval_freq: 10,
        label_smooth: true,
        seed: 7,
        ..EngineConfig::default()
    };
    let sampler = SamplerSpec {
        kind: SamplerKind::Random,
        batch_size: 32,
        ..SamplerSpec::default()
    };
    let optimizer = OptimizerConfig {
        kind: OptimizerKind::Adam,
        lr: 3e-4,
        ..OptimizerConfig::default()
    };
    let scheduler = SchedulerState::single_step(3e-4, 20, 0.1).unwrap();
    (config, sampler, optimizer, scheduler)
}

/// Triplet-mode settings: P=8 identities x K=4 instances, margin 0.3.
pub fn triplet_setup() -> (EngineConfig, SamplerSpec, OptimizerConfig, SchedulerState) {
    let config = EngineConfig {
        mode: EngineMode::Triplet,
        max_epoch: 60,
        eval_freq: 10,
        margin: 0.3,
        seed: 11,
        ..EngineConfig::default()
    };
    let sampler = SamplerSpec {
        kind: SamplerKind::RandomIdentity,
        batch_size: 32,
        num_instances: 4,
        seed: 11,
    };
    let optimizer = OptimizerConfig {
        kind: OptimizerKind::Adam,
        lr: 3e-4,
        ..OptimizerConfig::default()
    };
    let scheduler = SchedulerState::single_step(3e-4, 20, 0.1).unwrap();
    (config, sampler, optimizer, scheduler)
}

pub fn train_and_targets(data: &SyntheticData) -> (TrainSet, Vec<TargetSet>) {
    let train = TrainSet::new(data.split.clone(), data.train.clone()).unwrap();
    let targets = TargetSet::from_split(&data.split, &data.query, &data.gallery).unwrap();
    (train, targets)
}

pub fn linear_model(
    data: &SyntheticData,
    embed_dim: usize,
    seed: u64,
    optimizer: OptimizerConfig,
) -> (LinearReIDModel, OptimizerState) {
    let model = LinearReIDModel::new(
        data.train.cols(),
        embed_dim,
        data.split.num_train_pids(),
        seed,
    );
    let opt = OptimizerState::new(optimizer, model.params()).unwrap();
    (model, opt)
}

const FD_STEP: f64 = 1e-3;

/// Relative error `||a - n|| / max(||a||, ||n||)` between an analytic
/// gradient `a` and central differences `n` of `f`, over the whole gradient.
/// Element-wise ratios are not used: entries where per-anchor contributions
/// nearly cancel divide the O(h^2) truncation term by almost zero.
pub fn gradient_relative_error(
    x: &Array2<f64>,
    analytic: &Array2<f64>,
    f: impl Fn(&Array2<f64>) -> f64,
) -> f64 {
    let mut probe = x.clone();
    let mut diff = 0.0f64;
    let mut a_norm = 0.0f64;
    let mut n_norm = 0.0f64;
    for idx in ndarray::indices(x.dim()) {
        let orig = probe[idx];
        probe[idx] = orig + FD_STEP;
        let up = f(&probe);
        probe[idx] = orig - FD_STEP;
        let down = f(&probe);
        probe[idx] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        diff += (analytic[idx] - numeric).powi(2);
        a_norm += analytic[idx].powi(2);
        n_norm += numeric.powi(2);
    }
    let scale = a_norm.max(n_norm).sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff.sqrt() / scale
    }
}

/// Gradient check of label-smoothed cross-entropy on one random batch.
pub fn cross_entropy_grad_error(seed: u64) -> f64 {
    use reidbench::losses::{cross_entropy_smooth, LogitsBatch};
    let mut r = rng(seed);
    let b = r.gen_range(1..=16);
    let k = r.gen_range(2..=12);
    let eps = if r.gen_bool(0.5) {
        0.1
    } else {
        r.gen_range(0.0..0.5)
    };
    let logits = Array2::from_shape_fn((b, k), |_| r.gen_range(-4.0..4.0));
    let labels: Vec<usize> = (0..b).map(|_| r.gen_range(0..k)).collect();
    let out = cross_entropy_smooth(
        &LogitsBatch::new(logits.clone(), labels.clone()).unwrap(),
        eps,
    )
    .unwrap();
    let loss = |z: &Array2<f64>| {
        cross_entropy_smooth(&LogitsBatch::new(z.clone(), labels.clone()).unwrap(), eps)
            .unwrap()
            .value
    };
    assert!((out.value - oracle_cross_entropy(&logits, &labels, eps)).abs() < 1e-12);
    gradient_relative_error(&logits, &out.grad, loss)
}

/// Gradient check of batch-hard triplet loss on one random P x K batch.
///
/// Batches are redrawn until every tie and hinge is at least `1e-2` (ten
/// finite-difference steps) away and every selected distance is at least
/// `0.1`, keeping the step clear of non-smooth points. Returns the error and
/// the number of anchors with an active hinge.
pub fn triplet_grad_error(seed: u64) -> (f64, usize) {
    use reidbench::losses::{triplet_hard, EmbeddingBatch};
    let mut r = rng(seed);
    let margin = 0.3;
    let (x, labels) = loop {
        let p = r.gen_range(2..=6);
        let k = r.gen_range(2..=4);
        let d = r.gen_range(2..=16);
        let labels: Vec<u32> = (0..p * k).map(|i| (i / k) as u32).collect();
        let centers = Array2::from_shape_fn((p, d), |_| r.gen_range(-0.5..0.5));
        let x = Array2::from_shape_fn((p * k, d), |(i, j)| {
            centers[[i / k, j]] + r.gen_range(-0.5..0.5)
        });
        let (gap, nearest) = triplet_kink_distance(&x, &labels, margin);
        if gap > 1e-2 && nearest > 0.1 {
            break (x, labels);
        }
    };
    let out = triplet_hard(
        &EmbeddingBatch::new(x.clone(), labels.clone()).unwrap(),
        margin,
    )
    .unwrap();
    assert!((out.value - oracle_triplet(&x, &labels, margin)).abs() < 1e-12);
    let active = (0..x.nrows())
        .filter(|&a| out.grad.row(a).iter().any(|&g| g != 0.0))
        .count();
    let loss = |z: &Array2<f64>| {
        triplet_hard(
            &EmbeddingBatch::new(z.clone(), labels.clone()).unwrap(),
            margin,
        )
        .unwrap()
        .value
    };
    (gradient_relative_error(&x, &out.grad, loss), active)
}

/// A random image split with arbitrary (non-contiguous) pids and camids.
pub fn random_split(r: &mut impl Rng, tag: &str) -> DatasetSplit {
    let n_train = r.gen_range(1..30);
    let pid_pool: Vec<u32> = (0..r.gen_range(1..8))
        .map(|_| r.gen_range(0..1000))
        .collect();
    let cams = r.gen_range(1..5u32);
    let record = |r: &mut dyn rand::RngCore, part: &str, i: usize| {
        Record::image(
            format!("{tag}/{part}/{i}.jpg"),
            pid_pool[r.gen_range(0..pid_pool.len())],
            r.gen_range(0..cams),
            tag,
        )
    };
    let train = (0..n_train).map(|i| record(r, "train", i)).collect();
    let query = (0..r.gen_range(1..6))
        .map(|i| record(r, "query", i))
        .collect();
    let gallery = (0..r.gen_range(1..10))
        .map(|i| record(r, "gallery", i))
        .collect();
    DatasetSplit::new(tag, Modality::Image, train, query, gallery).unwrap()
}

/// Describes the first broken combination invariant, if any.
pub fn combination_violation(sources: &[DatasetSplit]) -> Option<String> {
    let combined = match combine_splits(sources) {
        Ok(c) => c,
        Err(e) => return Some(e.to_string()),
    };
    let sum = |f: fn(&DatasetSplit) -> usize| sources.iter().map(f).sum::<usize>();
    let total_pids = sum(DatasetSplit::num_train_pids);
    let pids: BTreeSet<u32> = combined.train().iter().map(Record::pid).collect();
    if combined.num_train_pids() != total_pids || pids != (0..total_pids as u32).collect() {
        return Some(format!("train pids {pids:?} are not 0..{total_pids}"));
    }
    let sizes = |s: &DatasetSplit| {
        [
            s.train().len(),
            s.query().len(),
            s.gallery().len(),
            s.segments().len(),
        ]
    };
    let expected = [
        sum(|s| s.train().len()),
        sum(|s| s.query().len()),
        sum(|s| s.gallery().len()),
        sum(|s| s.segments().len()),
    ];
    if sizes(&combined) != expected {
        return Some(format!(
            "sizes {:?}, expected {expected:?}",
            sizes(&combined)
        ));
    }

    // Each source's cameras land in their own offset range.
    let (mut offset, mut start) = (0usize, 0usize);
    for (i, s) in sources.iter().enumerate() {
        let part = &combined.train()[start..start + s.train().len()];
        let range = offset..offset + s.num_train_cams();
        if let Some(r) = part.iter().find(|r| !range.contains(&(r.camid() as usize))) {
            return Some(format!("source {i}: camid {} outside {range:?}", r.camid()));
        }
        if s.train()
            .iter()
            .zip(part)
            .any(|(a, b)| a.refs() != b.refs())
        {
            return Some(format!("source {i}: train records reordered"));
        }
        offset = range.end;
        start += s.train().len();
    }
    None
}

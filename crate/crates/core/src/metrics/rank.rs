use std::cmp::Ordering;
use std::collections::BTreeMap;

use ndarray::ArrayView1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DistanceMatrix, MetricsError};

/// CMC ranks reported by the command-line tools.
pub const REPORTED_RANKS: [usize; 4] = [1, 5, 10, 20];

pub const DEFAULT_REPEATS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Multi-shot gallery; entries sharing both pid and camid with the
    /// query are discarded.
    #[default]
    Standard,
    /// One randomly drawn gallery entry per identity, CMC averaged over
    /// seeded repetitions.
    SingleGalleryShot,
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Self::Standard),
            "single_gallery_shot" => Ok(Self::SingleGalleryShot),
            other => Err(format!(
                "unknown protocol '{other}' (expected standard|single_gallery_shot)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub protocol: Protocol,
    pub max_rank: usize,
    /// Repetitions for [`Protocol::SingleGalleryShot`]; ignored otherwise.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            protocol: Protocol::Standard,
            max_rank: 50,
            repeats: DEFAULT_REPEATS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `cmc[k]` is the fraction of valid queries matched within the top `k + 1`.
    pub cmc: Vec<f64>,
    pub map: f64,
    pub protocol: Protocol,
    pub num_valid_queries: usize,
    pub num_skipped_queries: usize,
    /// Average precision of each valid query, in query order.
    pub per_query_ap: Vec<f64>,
    /// Set when `max_rank` exceeded the gallery size and the curve was cut short.
    pub cmc_truncated: bool,
}

impl EvalReport {
    pub fn rank1(&self) -> f64 {
        self.cmc.first().copied().unwrap_or(0.0)
    }

    /// CMC value at 1-based `rank`, saturating at the last computed rank.
    pub fn cmc_at(&self, rank: usize) -> Option<f64> {
        if rank == 0 || self.cmc.is_empty() {
            return None;
        }
        Some(self.cmc[rank.min(self.cmc.len()) - 1])
    }
}

/// Result for one query: `cmc_hits[k]` counts hits within top `k + 1`
/// (summed over repeats for single-gallery-shot).
struct QueryOutcome {
    cmc_hits: Vec<u32>,
    ap: f64,
}

/// Strict ranking order: ascending distance, ties by ascending gallery index.
#[inline]
fn precedes(d_a: f32, i_a: usize, d_b: f32, i_b: usize) -> bool {
    match d_a.total_cmp(&d_b) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => i_a < i_b,
    }
}

/// Ranks of the valid matches within the valid gallery list, ascending.
///
/// Only the matches are sorted; every non-match is placed relative to them by
/// binary search, so a query costs `O(g log m)` rather than a full sort.
fn match_ranks(
    row: ArrayView1<'_, f32>,
    q_pid: u32,
    q_cam: u32,
    g_pids: &[u32],
    g_camids: &[u32],
) -> Vec<usize> {
    let mut matches: Vec<(f32, usize)> = Vec::new();
    for (j, (&pid, &cam)) in g_pids.iter().zip(g_camids).enumerate() {
        if pid == q_pid && cam != q_cam {
            matches.push((row[j], j));
        }
    }
    if matches.is_empty() {
        return Vec::new();
    }
    matches.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (last_d, last_i) = *matches.last().expect("non-empty");

    // before[p] = valid non-matches ranked after exactly p matches.
    let mut before = vec![0usize; matches.len() + 1];
    for (j, (&pid, &d)) in g_pids.iter().zip(row.iter()).enumerate() {
        if pid == q_pid {
            continue;
        }
        if !precedes(d, j, last_d, last_i) {
            before[matches.len()] += 1;
            continue;
        }
        let p = matches.partition_point(|&(md, mi)| precedes(md, mi, d, j));
        before[p] += 1;
    }

    let mut ranks = Vec::with_capacity(matches.len());
    let mut nonmatches = 0usize;
    for (p, _) in matches.iter().enumerate() {
        nonmatches += before[p];
        ranks.push(p + nonmatches);
    }
    ranks
}

fn average_precision(ranks: &[usize]) -> f64 {
    let mut ap = 0.0f64;
    for (hits, &rank) in ranks.iter().enumerate() {
        ap += (hits + 1) as f64 / (rank + 1) as f64;
    }
    ap / ranks.len() as f64
}

fn standard_outcome(ranks: &[usize], cmc_len: usize) -> QueryOutcome {
    let first = ranks[0];
    let cmc_hits = (0..cmc_len).map(|k| u32::from(first <= k)).collect();
    QueryOutcome {
        cmc_hits,
        ap: average_precision(ranks),
    }
}

#[allow(clippy::too_many_arguments)]
fn single_shot_outcome(
    row: ArrayView1<'_, f32>,
    q_index: usize,
    q_pid: u32,
    q_cam: u32,
    g_pids: &[u32],
    g_camids: &[u32],
    ranks: &[usize],
    cmc_len: usize,
    opts: &EvalOptions,
) -> QueryOutcome {
    let mut by_pid: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (j, (&pid, &cam)) in g_pids.iter().zip(g_camids).enumerate() {
        if pid == q_pid && cam == q_cam {
            continue;
        }
        by_pid.entry(pid).or_default().push(j);
    }
    let groups: Vec<(u32, Vec<usize>)> = by_pid.into_iter().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(q_index as u64);
    let mut cmc_hits = vec![0u32; cmc_len];
    for _ in 0..opts.repeats {
        let sampled: Vec<(u32, usize)> = groups
            .iter()
            .map(|(pid, idx)| (*pid, idx[rng.gen_range(0..idx.len())]))
            .collect();
        let &(_, m) = sampled
            .iter()
            .find(|(pid, _)| *pid == q_pid)
            .expect("valid query has a match group");
        let rank = sampled
            .iter()
            .filter(|&&(pid, j)| pid != q_pid && precedes(row[j], j, row[m], m))
            .count();
        for (k, hit) in cmc_hits.iter_mut().enumerate() {
            *hit += u32::from(rank <= k);
        }
    }
    QueryOutcome {
        cmc_hits,
        ap: average_precision(ranks),
    }
}

/// CMC and mAP for a query/gallery distance matrix.
///
/// Gallery entries sharing both pid and camid with a query are ignored for
/// that query. Queries without any remaining same-pid entry are skipped and
/// excluded from every denominator. Per-query work runs in parallel; the
/// final reduction walks queries in order, so results are independent of
/// thread scheduling.
pub fn evaluate_rank(
    dist: &DistanceMatrix,
    q_pids: &[u32],
    q_camids: &[u32],
    g_pids: &[u32],
    g_camids: &[u32],
    opts: &EvalOptions,
) -> Result<EvalReport, MetricsError> {
    let (nq, ng) = (dist.num_query(), dist.num_gallery());
    for (context, left, right) in [
        ("query pids vs distance rows", q_pids.len(), nq),
        ("query camids vs distance rows", q_camids.len(), nq),
        ("gallery pids vs distance columns", g_pids.len(), ng),
        ("gallery camids vs distance columns", g_camids.len(), ng),
    ] {
        if left != right {
            return Err(MetricsError::DimensionMismatch {
                context,
                left,
                right,
            });
        }
    }
    if opts.max_rank == 0 {
        return Err(MetricsError::InvalidMaxRank);
    }
    if opts.protocol == Protocol::SingleGalleryShot && opts.repeats == 0 {
        return Err(MetricsError::InvalidRepeats);
    }
    let cmc_truncated = opts.max_rank > ng;
    let cmc_len = opts.max_rank.min(ng);
    if cmc_truncated {
        log::warn!(
            "max_rank {} exceeds gallery size {ng}; CMC truncated",
            opts.max_rank
        );
    }

    let view = dist.view();
    let outcomes: Vec<Option<QueryOutcome>> = (0..nq)
        .into_par_iter()
        .map(|i| {
            let row = view.row(i);
            let ranks = match_ranks(row, q_pids[i], q_camids[i], g_pids, g_camids);
            if ranks.is_empty() {
                return None;
            }
            Some(match opts.protocol {
                Protocol::Standard => standard_outcome(&ranks, cmc_len),
                Protocol::SingleGalleryShot => single_shot_outcome(
                    row,
                    i,
                    q_pids[i],
                    q_camids[i],
                    g_pids,
                    g_camids,
                    &ranks,
                    cmc_len,
                    opts,
                ),
            })
        })
        .collect();

    let mut hits = vec![0u64; cmc_len];
    let mut per_query_ap = Vec::new();
    let mut skipped = 0usize;
    for outcome in &outcomes {
        match outcome {
            None => skipped += 1,
            Some(o) => {
                for (h, &c) in hits.iter_mut().zip(&o.cmc_hits) {
                    *h += u64::from(c);
                }
                per_query_ap.push(o.ap);
            }
        }
    }
    let valid = per_query_ap.len();
    if valid == 0 {
        return Err(MetricsError::NoValidQueries);
    }
    let per_query_weight = match opts.protocol {
        Protocol::Standard => 1,
        Protocol::SingleGalleryShot => opts.repeats,
    };
    let denom = (valid * per_query_weight) as f64;
    let cmc = hits.iter().map(|&h| h as f64 / denom).collect();
    let map = per_query_ap.iter().sum::<f64>() / valid as f64;

    Ok(EvalReport {
        cmc,
        map,
        protocol: opts.protocol,
        num_valid_queries: valid,
        num_skipped_queries: skipped,
        per_query_ap,
        cmc_truncated,
    })
}

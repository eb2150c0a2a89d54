use std::collections::BTreeMap;

use ndarray::{Array2, Zip};
use num_traits::Float;

use super::{check_finite, LossError, LossOutput};

pub const DEFAULT_MARGIN: f64 = 0.3;

/// `B x d` embeddings with one identity label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch<T> {
    data: Array2<T>,
    labels: Vec<u32>,
}

impl<T: Float> EmbeddingBatch<T> {
    pub fn new(data: Array2<T>, labels: Vec<u32>) -> Result<Self, LossError> {
        let rows = data.nrows();
        if rows == 0 {
            return Err(LossError::EmptyBatch);
        }
        if labels.len() != rows {
            return Err(LossError::LabelCount {
                rows,
                labels: labels.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self { data, labels })
    }

    pub fn data(&self) -> &Array2<T> {
        &self.data
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}

fn pairwise_euclidean<T: Float>(x: &Array2<T>) -> Array2<T> {
    let n = x.nrows();
    let mut d = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let mut acc = T::zero();
            Zip::from(x.row(i)).and(x.row(j)).for_each(|&a, &b| {
                let diff = a - b;
                acc = acc + diff * diff;
            });
            let dist = acc.sqrt();
            d[[i, j]] = dist;
            d[[j, i]] = dist;
        }
    }
    d
}

/// Batch-hard triplet loss on Euclidean distances.
///
/// For each anchor, the farthest same-label sample and the closest
/// other-label sample enter `max(0, margin + d_pos - d_neg)`; the result is
/// averaged over anchors. Ties in the hardest selection go to the lower
/// index. Coincident points contribute a zero subgradient.
pub fn triplet_hard<T: Float>(
    batch: &EmbeddingBatch<T>,
    margin: f64,
) -> Result<LossOutput<T>, LossError> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in &batch.labels {
        *counts.entry(l).or_default() += 1;
    }
    if let Some((&label, _)) = counts.iter().find(|(_, &c)| c < 2) {
        return Err(LossError::SingletonLabel(label));
    }
    if counts.len() < 2 {
        return Err(LossError::SingleClass);
    }

    let x = &batch.data;
    let n = x.nrows();
    let margin = T::from(margin).expect("float conversion");
    let inv_b = T::one() / T::from(n).expect("float conversion");
    let dist = pairwise_euclidean(x);

    let mut value = T::zero();
    let mut grad = Array2::<T>::zeros(x.raw_dim());
    for a in 0..n {
        let mut pos: Option<usize> = None;
        let mut neg: Option<usize> = None;
        for j in 0..n {
            if j == a {
                continue;
            }
            if batch.labels[j] == batch.labels[a] {
                if pos.is_none_or(|p| dist[[a, j]] > dist[[a, p]]) {
                    pos = Some(j);
                }
            } else if neg.is_none_or(|q| dist[[a, j]] < dist[[a, q]]) {
                neg = Some(j);
            }
        }
        let (p, q) = (
            pos.expect("label has >= 2 instances"),
            neg.expect(">= 2 labels"),
        );
        let hinge = margin + dist[[a, p]] - dist[[a, q]];
        if hinge <= T::zero() {
            continue;
        }
        value = value + hinge;

        // d||xa - xj|| / dxa = (xa - xj) / ||xa - xj||
        for (j, sign) in [(p, T::one()), (q, -T::one())] {
            let d = dist[[a, j]];
            if d == T::zero() {
                continue;
            }
            let coef = sign * inv_b / d;
            for c in 0..x.ncols() {
                let g = coef * (x[[a, c]] - x[[j, c]]);
                grad[[a, c]] = grad[[a, c]] + g;
                grad[[j, c]] = grad[[j, c]] - g;
            }
        }
    }
    Ok(LossOutput {
        value: value * inv_b,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separated_clusters_have_zero_loss() {
        // dp = 0 inside clusters, dn = 0.5 between them
        let x = array![[0.0f64, 0.0], [0.0, 0.0], [0.5, 0.0], [0.5, 0.0]];
        let b = EmbeddingBatch::new(x, vec![0, 0, 1, 1]).unwrap();
        let out = triplet_hard(&b, 0.3).unwrap();
        assert_eq!(out.value, 0.0);
        assert!(out.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn collapsed_embeddings_cost_the_margin() {
        let x = Array2::<f64>::from_elem((4, 3), 1.25);
        let b = EmbeddingBatch::new(x, vec![0, 0, 1, 1]).unwrap();
        let out = triplet_hard(&b, 0.3).unwrap();
        assert!((out.value - 0.3).abs() < 1e-12);
        assert!(out.grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn label_errors() {
        let x = Array2::<f64>::zeros((3, 2));
        let b = EmbeddingBatch::new(x.clone(), vec![0, 0, 7]).unwrap();
        assert_eq!(triplet_hard(&b, 0.3), Err(LossError::SingletonLabel(7)));
        let b = EmbeddingBatch::new(x, vec![1, 1, 1]).unwrap();
        assert_eq!(triplet_hard(&b, 0.3), Err(LossError::SingleClass));
    }
}

use ndarray::Array2;
use num_traits::Float;

use super::{check_finite, LossError, LossOutput};

/// Smoothing used when label smoothing is switched on without a value.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// `B x K` logits with one class index per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitsBatch<T> {
    data: Array2<T>,
    labels: Vec<usize>,
}

impl<T: Float> LogitsBatch<T> {
    pub fn new(data: Array2<T>, labels: Vec<usize>) -> Result<Self, LossError> {
        let (rows, classes) = data.dim();
        if rows == 0 {
            return Err(LossError::EmptyBatch);
        }
        if labels.len() != rows {
            return Err(LossError::LabelCount {
                rows,
                labels: labels.len(),
            });
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(LossError::LabelOutOfRange {
                row,
                label,
                classes,
            });
        }
        check_finite(&data)?;
        Ok(Self { data, labels })
    }

    pub fn data(&self) -> &Array2<T> {
        &self.data
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Cross-entropy against `(1 - eps) * onehot + eps / K`, averaged over the
/// batch. The gradient is `(softmax - target) / B`.
pub fn cross_entropy_smooth<T: Float>(
    batch: &LogitsBatch<T>,
    epsilon: f64,
) -> Result<LossOutput<T>, LossError> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(LossError::InvalidEpsilon(epsilon));
    }
    let (rows, classes) = batch.data.dim();
    if classes < 2 {
        return Err(LossError::TooFewClasses(classes));
    }
    let cast = |v: f64| T::from(v).expect("float conversion");
    let eps = cast(epsilon);
    let off = eps / cast(classes as f64);
    let on = T::one() - eps + off;
    let inv_b = T::one() / cast(rows as f64);

    let mut value = T::zero();
    let mut grad = Array2::<T>::zeros((rows, classes));
    for (i, (logits, mut g)) in batch
        .data
        .outer_iter()
        .zip(grad.outer_iter_mut())
        .enumerate()
    {
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let sum = logits
            .iter()
            .fold(T::zero(), |acc, &x| acc + (x - max).exp());
        let lse = max + sum.ln();
        let mut row_loss = T::zero();
        for (k, (&x, gk)) in logits.iter().zip(g.iter_mut()).enumerate() {
            let target = if k == batch.labels[i] { on } else { off };
            let log_p = x - lse;
            row_loss = row_loss - target * log_p;
            *gk = (log_p.exp() - target) * inv_b;
        }
        value = value + row_loss;
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
    fn uniform_logits_give_log_k() {
        for eps in [0.0, 0.1, 0.5] {
            let b = LogitsBatch::new(array![[0.7f64, 0.7, 0.7, 0.7]], vec![1]).unwrap();
            let out = cross_entropy_smooth(&b, eps).unwrap();
            assert!((out.value - 4f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn no_smoothing_is_plain_cross_entropy() {
        let b = LogitsBatch::new(array![[1.0f64, 2.0, 3.0]], vec![0]).unwrap();
        let out = cross_entropy_smooth(&b, 0.0).unwrap();
        let z: f64 = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).sum();
        assert!((out.value - (z.ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let b = LogitsBatch::new(array![[0.3f64, -1.0, 2.0], [5.0, 0.0, 1.0]], vec![2, 1]).unwrap();
        let out = cross_entropy_smooth(&b, 0.1).unwrap();
        for row in out.grad.outer_iter() {
            assert!(row.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn stable_for_large_logits() {
        let b = LogitsBatch::new(array![[1000.0f32, 0.0]], vec![0]).unwrap();
        let out = cross_entropy_smooth(&b, 0.0).unwrap();
        assert!(out.value.is_finite() && out.value >= 0.0);
    }

    #[test]
    fn validation() {
        let b = LogitsBatch::new(array![[0.0f64, 1.0]], vec![0]).unwrap();
        assert_eq!(
            cross_entropy_smooth(&b, 1.0),
            Err(LossError::InvalidEpsilon(1.0))
        );
        assert_eq!(
            cross_entropy_smooth(&b, -0.1),
            Err(LossError::InvalidEpsilon(-0.1))
        );
        let one = LogitsBatch::new(array![[0.0f64]], vec![0]).unwrap();
        assert_eq!(
            cross_entropy_smooth(&one, 0.1),
            Err(LossError::TooFewClasses(1))
        );
        assert!(matches!(
            LogitsBatch::new(array![[0.0f64, 1.0]], vec![2]),
            Err(LossError::LabelOutOfRange { .. })
        ));
        assert!(matches!(
            LogitsBatch::new(array![[f64::NAN, 1.0]], vec![0]),
            Err(LossError::NonFinite { row: 0, col: 0 })
        ));
    }
}

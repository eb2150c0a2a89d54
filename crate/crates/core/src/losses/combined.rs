use ndarray::Array2;
use num_traits::Float;

use super::{LossError, LossOutput};

/// Weighted sum of a classification and a metric-learning loss.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedLoss<T> {
    pub value: T,
    /// Gradient w.r.t. the logits, already scaled by `w_ce`.
    pub ce_grad: Array2<T>,
    /// Gradient w.r.t. the embeddings, already scaled by `w_tri`.
    pub tri_grad: Array2<T>,
}

pub fn combined_loss<T: Float>(
    ce: &LossOutput<T>,
    tri: &LossOutput<T>,
    w_ce: f64,
    w_tri: f64,
) -> Result<CombinedLoss<T>, LossError> {
    if !(w_ce >= 0.0 && w_tri >= 0.0) || (w_ce == 0.0 && w_tri == 0.0) {
        return Err(LossError::InvalidWeights(w_ce, w_tri));
    }
    let (wc, wt) = (
        T::from(w_ce).expect("float conversion"),
        T::from(w_tri).expect("float conversion"),
    );
    Ok(CombinedLoss {
        value: wc * ce.value + wt * tri.value,
        ce_grad: ce.grad.mapv(|g| g * wc),
        tri_grad: tri.grad.mapv(|g| g * wt),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn out(value: f64) -> LossOutput<f64> {
        LossOutput {
            value,
            grad: array![[1.0, -2.0]],
        }
    }

    #[test]
    fn weights() {
        let c = combined_loss(&out(1.0), &out(0.25), 0.5, 2.0).unwrap();
        assert_eq!(c.value, 1.0);
        assert_eq!(c.ce_grad, array![[0.5, -1.0]]);
        assert_eq!(c.tri_grad, array![[2.0, -4.0]]);

        let c = combined_loss(&out(1.5), &out(0.25), 1.0, 0.0).unwrap();
        assert_eq!(c.value, 1.5);
        assert!(c.tri_grad.iter().all(|&g| g == 0.0));

        assert_eq!(
            combined_loss(&out(1.5), &out(0.25), 1.0, 1.0)
                .unwrap()
                .value,
            1.75
        );
    }

    #[test]
    fn zero_or_negative_weights_rejected() {
        assert!(combined_loss(&out(1.0), &out(1.0), 0.0, 0.0).is_err());
        assert!(combined_loss(&out(1.0), &out(1.0), -1.0, 1.0).is_err());
    }
}

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// A named parameter tensor. Vectors are stored as `1 x n` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Array2<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub embeddings: Array2<f32>,
    pub logits: Array2<f32>,
}

/// The seam between the engine and a model: forward pass plus a
/// hand-written backward pass.
pub trait DifferentiableModel {
    fn params(&self) -> &[Param];

    fn params_mut(&mut self) -> &mut [Param];

    fn forward(&self, features: ArrayView2<'_, f32>) -> ForwardOutput;

    /// Gradients for every parameter, in [`params`](Self::params) order,
    /// given upstream gradients on the embeddings and/or the logits.
    fn backward(
        &self,
        features: ArrayView2<'_, f32>,
        grad_embeddings: Option<&Array2<f32>>,
        grad_logits: Option<&Array2<f32>>,
    ) -> Vec<Array2<f32>>;

    fn embed(&self, features: ArrayView2<'_, f32>) -> Array2<f32> {
        self.forward(features).embeddings
    }

    fn param_names(&self) -> Vec<&str> {
        self.params().iter().map(|p| p.name.as_str()).collect()
    }
}

/// `embeddings = x W_embed`, `logits = embeddings W_cls + b_cls`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearReIDModel {
    params: Vec<Param>,
}

const W_EMBED: usize = 0;
const W_CLS: usize = 1;
const B_CLS: usize = 2;

impl LinearReIDModel {
    /// `W_embed ~ N(0, 1/embed_dim)` roughly preserves input distances;
    /// `W_cls ~ N(0, 0.01^2)`; `b_cls = 0`.
    pub fn new(in_dim: usize, embed_dim: usize, num_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embed_init = Normal::new(0.0f32, 1.0 / (embed_dim as f32).sqrt()).expect("valid std");
        let cls_init = Normal::new(0.0f32, 0.01).expect("valid std");
        let w_embed =
            Array2::from_shape_simple_fn((in_dim, embed_dim), || embed_init.sample(&mut rng));
        let w_cls =
            Array2::from_shape_simple_fn((embed_dim, num_classes), || cls_init.sample(&mut rng));
        Self {
            params: vec![
                Param {
                    name: "W_embed".into(),
                    value: w_embed,
                },
                Param {
                    name: "W_cls".into(),
                    value: w_cls,
                },
                Param {
                    name: "b_cls".into(),
                    value: Array2::zeros((1, num_classes)),
                },
            ],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.params[W_EMBED].value.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.params[W_EMBED].value.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.params[W_CLS].value.ncols()
    }
}

impl DifferentiableModel for LinearReIDModel {
    fn params(&self) -> &[Param] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    fn forward(&self, features: ArrayView2<'_, f32>) -> ForwardOutput {
        let embeddings = features.dot(&self.params[W_EMBED].value);
        let logits = embeddings.dot(&self.params[W_CLS].value) + &self.params[B_CLS].value;
        ForwardOutput { embeddings, logits }
    }

    fn backward(
        &self,
        features: ArrayView2<'_, f32>,
        grad_embeddings: Option<&Array2<f32>>,
        grad_logits: Option<&Array2<f32>>,
    ) -> Vec<Array2<f32>> {
        let w_cls = &self.params[W_CLS].value;
        let batch = features.nrows();
        let mut g_embed = grad_embeddings
            .cloned()
            .unwrap_or_else(|| Array2::zeros((batch, self.embed_dim())));
        let (g_wcls, g_b) = match grad_logits {
            Some(gl) => {
                let embeddings = features.dot(&self.params[W_EMBED].value);
                g_embed = g_embed + gl.dot(&w_cls.t());
                (
                    embeddings.t().dot(gl),
                    gl.sum_axis(Axis(0)).insert_axis(Axis(0)),
                )
            }
            None => (
                Array2::zeros(w_cls.raw_dim()),
                Array2::zeros((1, self.num_classes())),
            ),
        };
        let g_wembed = features.t().dot(&g_embed);
        vec![g_wembed, g_wcls, g_b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn forward_shapes_and_determinism() {
        let m = LinearReIDModel::new(3, 2, 4, 7);
        assert_eq!(m, LinearReIDModel::new(3, 2, 4, 7));
        let out = m.forward(array![[1.0f32, 0.0, 0.0], [0.0, 1.0, 0.0]].view());
        assert_eq!(out.embeddings.dim(), (2, 2));
        assert_eq!(out.logits.dim(), (2, 4));
        assert_eq!(out.embeddings.row(0), m.params()[0].value.row(0));
        assert_eq!(m.param_names(), vec!["W_embed", "W_cls", "b_cls"]);
    }

    /// Backward matches finite differences of `sum(G_L * logits) + sum(G_E * emb)`.
    #[test]
    fn backward_matches_finite_differences() {
        let mut m = LinearReIDModel::new(3, 2, 3, 1);
        let x = array![[0.5f32, -1.0, 2.0], [1.5, 0.25, -0.5]];
        let ge = array![[0.1f32, -0.2], [0.3, 0.05]];
        let gl = array![[0.2f32, -0.1, 0.4], [-0.3, 0.6, 0.1]];
        let objective = |m: &LinearReIDModel| -> f64 {
            let o = m.forward(x.view());
            (&o.embeddings * &ge).mapv(f64::from).sum() + (&o.logits * &gl).mapv(f64::from).sum()
        };
        let grads = m.backward(x.view(), Some(&ge), Some(&gl));
        let h = 1e-2f32;
        for (p, grad) in grads.iter().enumerate() {
            for idx in 0..grad.len() {
                let orig = m.params()[p].value.as_slice().unwrap()[idx];
                m.params_mut()[p].value.as_slice_mut().unwrap()[idx] = orig + h;
                let up = objective(&m);
                m.params_mut()[p].value.as_slice_mut().unwrap()[idx] = orig - h;
                let down = objective(&m);
                m.params_mut()[p].value.as_slice_mut().unwrap()[idx] = orig;
                let numeric = (up - down) / (2.0 * f64::from(h));
                let analytic = f64::from(grad.as_slice().unwrap()[idx]);
                assert!(
                    (numeric - analytic).abs() < 1e-3,
                    "param {p} idx {idx}: {numeric} vs {analytic}"
                );
            }
        }
    }
}

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{EngineError, Param};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_momentum() -> f64 {
    0.9
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr: 3e-4,
            momentum: default_momentum(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!(
                "betas ({}, {}) outside [0, 1)",
                self.beta1, self.beta2
            ));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        Ok(())
    }
}

/// Optimizer hyper-parameters plus per-parameter moment buffers.
///
/// SGD keeps one momentum buffer per parameter; Adam keeps first and second
/// moments and a per-parameter step count for bias correction, so a
/// parameter that starts updating late (after being frozen) is corrected
/// from its own first step.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    /// Learning rate used by the next step; the engine sets it each epoch.
    pub lr: f64,
    pub step_count: u64,
    pub param_steps: Vec<u64>,
    /// `buffers[p]` holds the moment tensors of parameter `p`.
    pub buffers: Vec<Vec<Array2<f32>>>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, params: &[Param]) -> Result<Self, EngineError> {
        config.validate()?;
        let per_param = match config.kind {
            OptimizerKind::Sgd => 1,
            OptimizerKind::Adam => 2,
        };
        let buffers = params
            .iter()
            .map(|p| {
                (0..per_param)
                    .map(|_| Array2::zeros(p.value.raw_dim()))
                    .collect()
            })
            .collect();
        Ok(Self {
            lr: config.lr,
            config,
            step_count: 0,
            param_steps: vec![0; params.len()],
            buffers,
        })
    }

    /// Applies one update. `grads[p] = None` leaves parameter `p` and its
    /// buffers untouched. Any non-finite gradient aborts before anything is
    /// modified.
    pub fn step(
        &mut self,
        params: &mut [Param],
        grads: &[Option<Array2<f32>>],
    ) -> Result<(), EngineError> {
        if params.len() != grads.len() || params.len() != self.buffers.len() {
            return Err(EngineError::Shape(format!(
                "{} params, {} grads, {} buffer sets",
                params.len(),
                grads.len(),
                self.buffers.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if let Some(g) = g {
                if g.raw_dim() != p.value.raw_dim() {
                    return Err(EngineError::Shape(format!(
                        "gradient for '{}' is {:?}, parameter is {:?}",
                        p.name,
                        g.dim(),
                        p.value.dim()
                    )));
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(EngineError::NonFiniteGradient(p.name.clone()));
                }
            }
        }

        let lr = self.lr;
        let cfg = self.config;
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let Some(g) = g else { continue };
            self.param_steps[i] += 1;
            match cfg.kind {
                OptimizerKind::Sgd => {
                    let first = self.param_steps[i] == 1;
                    let buf = &mut self.buffers[i][0];
                    Zip::from(&mut p.value)
                        .and(buf)
                        .and(g)
                        .for_each(|w, b, &gv| {
                            let gv = f64::from(gv);
                            let v = if first || cfg.momentum == 0.0 {
                                gv
                            } else {
                                cfg.momentum * f64::from(*b) + gv
                            };
                            *b = v as f32;
                            *w = (f64::from(*w) - lr * v) as f32;
                        });
                }
                OptimizerKind::Adam => {
                    let t = self.param_steps[i] as i32;
                    let bc1 = 1.0 - cfg.beta1.powi(t);
                    let bc2 = 1.0 - cfg.beta2.powi(t);
                    let (m, v) = self.buffers[i].split_at_mut(1);
                    Zip::from(&mut p.value)
                        .and(&mut m[0])
                        .and(&mut v[0])
                        .and(g)
                        .for_each(|w, m, v, &gv| {
                            let gv = f64::from(gv);
                            let m_new = cfg.beta1 * f64::from(*m) + (1.0 - cfg.beta1) * gv;
                            let v_new = cfg.beta2 * f64::from(*v) + (1.0 - cfg.beta2) * gv * gv;
                            *m = m_new as f32;
                            *v = v_new as f32;
                            let m_hat = m_new / bc1;
                            let v_hat = v_new / bc2;
                            *w = (f64::from(*w) - lr * m_hat / (v_hat.sqrt() + cfg.eps)) as f32;
                        });
                }
            }
        }
        self.step_count += 1;
        Ok(())
    }
}

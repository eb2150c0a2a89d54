use serde::{Deserialize, Serialize};

use super::EngineError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    /// Decay by `gamma` every `stepsize` epochs.
    SingleStep { stepsize: usize },
    /// Decay by `gamma` at each listed epoch.
    MultiStep { milestones: Vec<usize> },
}

/// Step-decay learning-rate schedule. The rate is a closed-form function of
/// the epoch, so the state never changes during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerState {
    pub schedule: LrSchedule,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub base_lr: f64,
}

fn default_gamma() -> f64 {
    0.1
}

impl SchedulerState {
    pub fn single_step(base_lr: f64, stepsize: usize, gamma: f64) -> Result<Self, EngineError> {
        let s = Self {
            schedule: LrSchedule::SingleStep { stepsize },
            gamma,
            base_lr,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn multi_step(
        base_lr: f64,
        milestones: Vec<usize>,
        gamma: f64,
    ) -> Result<Self, EngineError> {
        let s = Self {
            schedule: LrSchedule::MultiStep { milestones },
            gamma,
            base_lr,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(EngineError::Config(format!(
                "gamma {} outside (0, 1]",
                self.gamma
            )));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(EngineError::Config(format!(
                "base lr must be positive, got {}",
                self.base_lr
            )));
        }
        match &self.schedule {
            LrSchedule::SingleStep { stepsize: 0 } => {
                Err(EngineError::Config("stepsize must be positive".into()))
            }
            LrSchedule::MultiStep { milestones } if milestones.windows(2).any(|w| w[0] >= w[1]) => {
                Err(EngineError::Config(format!(
                    "milestones {milestones:?} are not strictly increasing"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        let decays = match &self.schedule {
            LrSchedule::SingleStep { stepsize } => epoch / stepsize,
            LrSchedule::MultiStep { milestones } => {
                milestones.iter().filter(|&&m| m <= epoch).count()
            }
        };
        self.base_lr * self.gamma.powi(decays as i32)
    }
}

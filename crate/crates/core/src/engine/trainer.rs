use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    save_checkpoint, CheckpointBundle, DifferentiableModel, EngineError, OptimizerState,
    SchedulerState, TargetSet, TrainSet,
};
use crate::dataman::{make_batches, SamplerKind, SamplerSpec};
use crate::losses::{
    combined_loss, cross_entropy_smooth, triplet_hard, EmbeddingBatch, LogitsBatch, LossOutput,
    DEFAULT_EPSILON, DEFAULT_MARGIN,
};
use crate::metrics::{
    distance_matrix, evaluate_rank, EmbeddingMatrix, EvalOptions, EvalReport, Metric, Protocol,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineMode {
    /// Classification with (optionally label-smoothed) cross-entropy.
    #[default]
    Softmax,
    /// Batch-hard triplet loss, optionally plus weighted cross-entropy.
    Triplet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub mode: EngineMode,
    pub max_epoch: usize,
    pub eval_freq: usize,
    /// Log every `print_freq` batches.
    pub print_freq: usize,
    pub label_smooth: bool,
    pub epsilon: f64,
    pub margin: f64,
    pub w_ce: f64,
    pub w_tri: f64,
    /// Parameter groups that keep training during the first `fixbase_epoch` epochs.
    pub open_layers: Vec<String>,
    pub fixbase_epoch: usize,
    pub save_dir: Option<PathBuf>,
    pub seed: u64,
    pub metric: Metric,
    pub protocol: Protocol,
    pub max_rank: usize,
    pub repeats: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            mode: EngineMode::Softmax,
            max_epoch: 60,
            eval_freq: 10,
            print_freq: 10,
            label_smooth: true,
            epsilon: DEFAULT_EPSILON,
            margin: DEFAULT_MARGIN,
            w_ce: 1.0,
            w_tri: 1.0,
            open_layers: Vec::new(),
            fixbase_epoch: 0,
            save_dir: None,
            seed: 0,
            metric: Metric::EuclideanSquared,
            protocol: Protocol::Standard,
            max_rank: 50,
            repeats: crate::metrics::DEFAULT_REPEATS,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self, param_names: &[&str]) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if self.max_epoch == 0 {
            return bad("max_epoch must be at least 1".into());
        }
        if self.eval_freq == 0 || self.print_freq == 0 {
            return bad("eval_freq and print_freq must be at least 1".into());
        }
        if self.fixbase_epoch >= self.max_epoch {
            return bad(format!(
                "fixbase_epoch {} must be below max_epoch {}",
                self.fixbase_epoch, self.max_epoch
            ));
        }
        if let Some(name) = self
            .open_layers
            .iter()
            .find(|n| !param_names.contains(&n.as_str()))
        {
            return bad(format!(
                "open layer '{name}' is not a model parameter ({param_names:?})"
            ));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} outside [0, 1)", self.epsilon));
        }
        if self.margin.is_nan() || self.margin < 0.0 {
            return bad(format!("margin must be non-negative, got {}", self.margin));
        }
        if self.mode == EngineMode::Triplet
            && (!(self.w_ce >= 0.0 && self.w_tri >= 0.0) || self.w_ce + self.w_tri == 0.0)
        {
            return bad(format!(
                "loss weights ({}, {}) invalid",
                self.w_ce, self.w_tri
            ));
        }
        if self.max_rank == 0 || self.repeats == 0 {
            return bad("max_rank and repeats must be at least 1".into());
        }
        Ok(())
    }

    fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            protocol: self.protocol,
            max_rank: self.max_rank,
            repeats: self.repeats,
            seed: self.seed,
        }
    }

    fn smoothing(&self) -> f64 {
        if self.label_smooth {
            self.epsilon
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub dataset_tag: String,
    pub rank1: f64,
    pub map: f64,
}

/// One line of the JSON-lines training log. Epochs are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogRecord {
    Header {
        mode: EngineMode,
        num_train_pids: usize,
        num_train_records: usize,
        targets: Vec<String>,
    },
    Train {
        epoch: usize,
        batch: usize,
        loss: f64,
        lr: f64,
    },
    Eval {
        epoch: usize,
        results: Vec<EvalEntry>,
    },
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub log: Vec<LogRecord>,
    /// Mean per-sample training loss of every epoch run in this call.
    pub epoch_losses: Vec<f64>,
    /// Reports from the most recent evaluation, one per target.
    pub last_reports: Vec<(String, EvalReport)>,
    pub checkpoint: CheckpointBundle,
}

/// Training loop over a [`DifferentiableModel`].
pub struct Engine<M> {
    model: M,
    optimizer: OptimizerState,
    scheduler: SchedulerState,
    config: EngineConfig,
    sampler: SamplerSpec,
    epoch: usize,
    best_rank1: f64,
    digest: String,
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (epoch as u64)
            .wrapping_add(1)
            .wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

fn config_digest(config: &EngineConfig, sampler: &SamplerSpec) -> String {
    // Fields that only control how long or how verbosely training runs are
    // left out so a run can be resumed with a longer schedule.
    let stable = EngineConfig {
        max_epoch: 0,
        eval_freq: 0,
        print_freq: 0,
        save_dir: None,
        ..config.clone()
    };
    let bytes = serde_json::to_vec(&(stable, sampler)).expect("config serializes");
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl<M: DifferentiableModel> Engine<M> {
    pub fn new(
        model: M,
        optimizer: OptimizerState,
        scheduler: SchedulerState,
        config: EngineConfig,
        sampler: SamplerSpec,
    ) -> Result<Self, EngineError> {
        config.validate(&model.param_names())?;
        scheduler.validate()?;
        sampler.validate()?;
        if config.mode == EngineMode::Triplet && sampler.kind != SamplerKind::RandomIdentity {
            return Err(EngineError::Config(
                "triplet mode requires the random_identity sampler".into(),
            ));
        }
        if optimizer.buffers.len() != model.params().len() {
            return Err(EngineError::Config(
                "optimizer state does not match model".into(),
            ));
        }
        let digest = config_digest(&config, &sampler);
        Ok(Self {
            model,
            optimizer,
            scheduler,
            config,
            sampler,
            epoch: 0,
            best_rank1: 0.0,
            digest,
        })
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn into_model(self) -> M {
        self.model
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn config_digest(&self) -> &str {
        &self.digest
    }

    pub fn checkpoint(&self) -> CheckpointBundle {
        CheckpointBundle {
            params: self.model.params().to_vec(),
            optimizer: self.optimizer.clone(),
            scheduler: self.scheduler.clone(),
            epoch: self.epoch,
            best_rank1: self.best_rank1,
            config_digest: self.digest.clone(),
        }
    }

    /// Restores parameters, optimizer and progress from a checkpoint written
    /// under the same configuration.
    pub fn resume(&mut self, bundle: CheckpointBundle) -> Result<(), EngineError> {
        if bundle.config_digest != self.digest {
            return Err(EngineError::CheckpointMismatch(format!(
                "config digest {} vs {}",
                bundle.config_digest, self.digest
            )));
        }
        self.load_params(&bundle.params)?;
        if bundle.epoch > self.config.max_epoch {
            return Err(EngineError::CheckpointMismatch(format!(
                "checkpoint is at epoch {}, beyond max_epoch {}",
                bundle.epoch, self.config.max_epoch
            )));
        }
        self.optimizer = bundle.optimizer;
        self.scheduler = bundle.scheduler;
        self.epoch = bundle.epoch;
        self.best_rank1 = bundle.best_rank1;
        Ok(())
    }

    fn load_params(&mut self, params: &[super::Param]) -> Result<(), EngineError> {
        let current = self.model.params();
        let compatible = current.len() == params.len()
            && current
                .iter()
                .zip(params)
                .all(|(a, b)| a.name == b.name && a.value.dim() == b.value.dim());
        if !compatible {
            return Err(EngineError::CheckpointMismatch(
                "parameter names or shapes differ from the model".into(),
            ));
        }
        self.model.params_mut().clone_from_slice(params);
        Ok(())
    }

    pub fn evaluate(
        &self,
        targets: &[TargetSet],
    ) -> Result<Vec<(String, EvalReport)>, EngineError> {
        evaluate_targets(&self.model, targets, &self.config)
    }

    /// Trains until `max_epoch`.
    pub fn run(
        &mut self,
        train: &TrainSet,
        targets: &[TargetSet],
    ) -> Result<TrainingOutcome, EngineError> {
        self.run_until(self.config.max_epoch, train, targets)
    }

    /// Trains from the current epoch up to (excluding) `end_epoch`, clamped
    /// to `max_epoch`. Stopping early and resuming from the checkpoint gives
    /// the same result as one uninterrupted run.
    pub fn run_until(
        &mut self,
        end_epoch: usize,
        train: &TrainSet,
        targets: &[TargetSet],
    ) -> Result<TrainingOutcome, EngineError> {
        let end_epoch = end_epoch.min(self.config.max_epoch);
        if targets.is_empty() {
            return Err(EngineError::Config(
                "at least one evaluation target is required".into(),
            ));
        }
        let features = train.features();
        let probe = self
            .model
            .forward(features.view().slice(ndarray::s![0..1, ..]));
        if self.needs_logits() && probe.logits.ncols() != train.split().num_train_pids() {
            return Err(EngineError::Config(format!(
                "model has {} classes, training data has {} identities",
                probe.logits.ncols(),
                train.split().num_train_pids()
            )));
        }

        let mut sink = match &self.config.save_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Some(LogSink::open(&dir.join("log.jsonl"))?)
            }
            None => None,
        };
        let mut log = Vec::new();
        let mut emit = |record: LogRecord, sink: &mut Option<LogSink>| -> Result<(), EngineError> {
            if let Some(s) = sink.as_mut() {
                s.write(&record)?;
            }
            log.push(record);
            Ok(())
        };

        if self.epoch == 0 {
            emit(
                LogRecord::Header {
                    mode: self.config.mode,
                    num_train_pids: train.split().num_train_pids(),
                    num_train_records: train.split().train().len(),
                    targets: targets.iter().map(|t| t.dataset_tag.clone()).collect(),
                },
                &mut sink,
            )?;
        }

        let labels = train.labels();
        let mut epoch_losses = Vec::new();
        let mut last_reports = Vec::new();
        while self.epoch < end_epoch {
            let epoch = self.epoch;
            let lr = self.scheduler.lr(epoch);
            self.optimizer.lr = lr;
            let frozen = epoch < self.config.fixbase_epoch;
            let spec = SamplerSpec {
                seed: epoch_seed(self.config.seed, epoch),
                ..self.sampler
            };

            // Per-sample mean, so a short final batch does not skew the epoch loss.
            let mut loss_sum = 0.0f64;
            let mut samples = 0usize;
            for (b, idx) in make_batches(train.split(), &spec)?.enumerate() {
                let x = features.view().select(Axis(0), &idx);
                let y: Vec<u32> = idx.iter().map(|&i| labels[i]).collect();
                let loss = self.train_step(&x, &y, frozen)?;
                if !loss.is_finite() {
                    return Err(EngineError::NonFiniteLoss {
                        epoch: epoch + 1,
                        batch: b,
                    });
                }
                loss_sum += loss * idx.len() as f64;
                samples += idx.len();
                if (b + 1) % self.config.print_freq == 0 {
                    emit(
                        LogRecord::Train {
                            epoch: epoch + 1,
                            batch: b + 1,
                            loss,
                            lr,
                        },
                        &mut sink,
                    )?;
                }
            }
            epoch_losses.push(if samples == 0 {
                0.0
            } else {
                loss_sum / samples as f64
            });
            self.epoch += 1;

            let done = self.epoch;
            if done.is_multiple_of(self.config.eval_freq) || done == self.config.max_epoch {
                let reports = self.evaluate(targets)?;
                self.best_rank1 = self.best_rank1.max(reports[0].1.rank1());
                emit(
                    LogRecord::Eval {
                        epoch: done,
                        results: reports
                            .iter()
                            .map(|(tag, r)| EvalEntry {
                                dataset_tag: tag.clone(),
                                rank1: r.rank1(),
                                map: r.map,
                            })
                            .collect(),
                    },
                    &mut sink,
                )?;
                last_reports = reports;
                if let Some(dir) = &self.config.save_dir {
                    save_checkpoint(
                        &self.checkpoint(),
                        &dir.join(format!("checkpoint-ep{done:03}.rckp")),
                    )?;
                }
            }
        }

        let checkpoint = self.checkpoint();
        if self.epoch == self.config.max_epoch {
            if let Some(dir) = &self.config.save_dir {
                save_checkpoint(&checkpoint, &dir.join("final.rckp"))?;
            }
        }
        Ok(TrainingOutcome {
            log,
            epoch_losses,
            last_reports,
            checkpoint,
        })
    }

    fn needs_logits(&self) -> bool {
        self.config.mode == EngineMode::Softmax || self.config.w_ce > 0.0
    }

    /// One forward/backward/update; returns the batch loss.
    fn train_step(&mut self, x: &Array2<f32>, y: &[u32], frozen: bool) -> Result<f64, EngineError> {
        let out = self.model.forward(x.view());
        let ce = |logits: Array2<f32>, eps: f64| -> Result<LossOutput<f32>, EngineError> {
            let batch = LogitsBatch::new(logits, y.iter().map(|&l| l as usize).collect())?;
            Ok(cross_entropy_smooth(&batch, eps)?)
        };
        let (value, grad_emb, grad_logits) = match self.config.mode {
            EngineMode::Softmax => {
                let l = ce(out.logits, self.config.smoothing())?;
                (l.value, None, Some(l.grad))
            }
            EngineMode::Triplet => {
                let tri = triplet_hard(
                    &EmbeddingBatch::new(out.embeddings, y.to_vec())?,
                    self.config.margin,
                )?;
                if self.config.w_ce > 0.0 {
                    let c = ce(out.logits, self.config.smoothing())?;
                    let total = combined_loss(&c, &tri, self.config.w_ce, self.config.w_tri)?;
                    (total.value, Some(total.tri_grad), Some(total.ce_grad))
                } else {
                    let w = self.config.w_tri as f32;
                    (tri.value * w, Some(tri.grad.mapv(|g| g * w)), None)
                }
            }
        };
        if !value.is_finite() {
            return Ok(f64::from(value));
        }
        let grads = self
            .model
            .backward(x.view(), grad_emb.as_ref(), grad_logits.as_ref());
        let open = &self.config.open_layers;
        let masked: Vec<Option<Array2<f32>>> = self
            .model
            .params()
            .iter()
            .zip(grads)
            .map(|(p, g)| (!frozen || open.contains(&p.name)).then_some(g))
            .collect();
        self.optimizer.step(self.model.params_mut(), &masked)?;
        Ok(f64::from(value))
    }
}

struct LogSink {
    writer: BufWriter<File>,
}

impl LogSink {
    fn open(path: &Path) -> Result<Self, EngineError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            writer: BufWriter::new(file),
        })
    }

    fn write(&mut self, record: &LogRecord) -> Result<(), EngineError> {
        serde_json::to_writer(&mut self.writer, record).map_err(std::io::Error::from)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }
}

fn evaluate_targets<M: DifferentiableModel>(
    model: &M,
    targets: &[TargetSet],
    config: &EngineConfig,
) -> Result<Vec<(String, EvalReport)>, EngineError> {
    targets
        .iter()
        .map(|t| {
            let q = EmbeddingMatrix::new(model.embed(t.query.view()))?;
            let g = EmbeddingMatrix::new(model.embed(t.gallery.view()))?;
            let dist = distance_matrix(&q, &g, config.metric)?;
            let report = evaluate_rank(
                &dist,
                &t.q_pids,
                &t.q_camids,
                &t.g_pids,
                &t.g_camids,
                &config.eval_options(),
            )?;
            Ok((t.dataset_tag.clone(), report))
        })
        .collect()
}

/// Builds an [`Engine`] and trains to `config.max_epoch`.
pub fn run_training<M: DifferentiableModel>(
    model: M,
    train: &TrainSet,
    targets: &[TargetSet],
    config: EngineConfig,
    optimizer: OptimizerState,
    scheduler: SchedulerState,
    sampler: SamplerSpec,
) -> Result<(M, TrainingOutcome), EngineError> {
    let mut engine = Engine::new(model, optimizer, scheduler, config, sampler)?;
    let outcome = engine.run(train, targets)?;
    Ok((engine.into_model(), outcome))
}

/// Evaluates every target without touching the model.
pub fn run_test_only<M: DifferentiableModel>(
    model: &M,
    targets: &[TargetSet],
    config: &EngineConfig,
) -> Result<Vec<(String, EvalReport)>, EngineError> {
    if targets.is_empty() {
        return Err(EngineError::Config(
            "at least one evaluation target is required".into(),
        ));
    }
    evaluate_targets(model, targets, config)
}

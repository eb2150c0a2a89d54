use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use reidbench::dataman::{combine_splits, SamplerSpec, TransformSpec};
use reidbench::engine::{
    load_checkpoint, run_test_only, DifferentiableModel, Engine, EngineConfig, LinearReIDModel,
    OptimizerConfig, OptimizerState, SchedulerState, TargetSet, TrainSet,
};
use reidbench::metrics::EmbeddingMatrix;
use reidbench::{EvalReport, Metric, Protocol};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{usage_bail, CliError, CliResult, Phase};
use crate::features::{load_feature_split, FeatureSplit};
use crate::report::{print_json, Summary};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    max_epoch: Option<usize>,
    #[arg(long)]
    eval_freq: Option<usize>,
    #[arg(long)]
    print_freq: Option<usize>,
    /// Seeds model initialisation and batch sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the log, checkpoints and reports.
    #[arg(long)]
    save_dir: Option<PathBuf>,
    /// Only evaluate the model stored in --checkpoint.
    #[arg(long)]
    test_only: bool,
    /// Checkpoint to resume from, or to evaluate with --test-only.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelConfig {
    embed_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { embed_dim: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SchedulerConfig {
    SingleStep {
        stepsize: usize,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    MultiStep {
        milestones: Vec<usize>,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
}

fn default_gamma() -> f64 {
    0.1
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self::SingleStep {
            stepsize: 20,
            gamma: default_gamma(),
        }
    }
}

impl SchedulerConfig {
    fn build(&self, base_lr: f64) -> anyhow::Result<SchedulerState> {
        Ok(match self.clone() {
            Self::SingleStep { stepsize, gamma } => {
                SchedulerState::single_step(base_lr, stepsize, gamma)?
            }
            Self::MultiStep { milestones, gamma } => {
                SchedulerState::multi_step(base_lr, milestones, gamma)?
            }
        })
    }
}

/// The JSON run configuration. Relative paths are resolved against the
/// directory of the configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    #[serde(default)]
    sources: Vec<PathBuf>,
    targets: Vec<PathBuf>,
    #[serde(default)]
    engine: EngineConfig,
    #[serde(default)]
    sampler: SamplerSpec,
    /// Image augmentation settings, checked but not needed for feature-level
    /// training.
    #[serde(default)]
    transform: Option<TransformSpec>,
    /// Shorthand for `engine.metric`.
    #[serde(default)]
    metric: Option<Metric>,
    /// Shorthand for `engine.protocol`.
    #[serde(default)]
    protocol: Option<Protocol>,
    #[serde(default)]
    optimizer: OptimizerConfig,
    #[serde(default)]
    scheduler: SchedulerConfig,
    #[serde(default)]
    model: ModelConfig,
}

impl RunConfig {
    fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.sources.iter_mut().for_each(resolve);
        config.targets.iter_mut().for_each(resolve);
        if let Some(dir) = config.engine.save_dir.as_mut() {
            resolve(dir);
        }
        Ok(config)
    }

    fn apply(&mut self, args: &TrainArgs) {
        let e = &mut self.engine;
        if let Some(v) = args.max_epoch {
            e.max_epoch = v;
        }
        if let Some(v) = args.eval_freq {
            e.eval_freq = v;
        }
        if let Some(v) = args.print_freq {
            e.print_freq = v;
        }
        if let Some(v) = args.seed {
            e.seed = v;
            self.sampler.seed = v;
        }
        if let Some(v) = &args.save_dir {
            e.save_dir = Some(v.clone());
        }
        if let Some(m) = self.metric {
            e.metric = m;
        }
        if let Some(p) = self.protocol {
            e.protocol = p;
        }
    }
}

fn load_targets(paths: &[PathBuf], dim: Option<usize>) -> anyhow::Result<Vec<TargetSet>> {
    let mut targets = Vec::new();
    for path in paths {
        let fs = load_feature_split(path)?;
        if let Some(d) = dim {
            if fs.dim() != d {
                return Err(anyhow!(
                    "{}: feature width {} differs from {d}",
                    path.display(),
                    fs.dim()
                ));
            }
        }
        targets.extend(TargetSet::from_split(&fs.split, &fs.query, &fs.gallery)?);
    }
    Ok(targets)
}

/// Combines the sources into one training set.
fn load_train(paths: &[PathBuf]) -> anyhow::Result<TrainSet> {
    let sources: Vec<FeatureSplit> = paths
        .iter()
        .map(|p| load_feature_split(p))
        .collect::<Result<_, _>>()?;
    let dim = sources[0].dim();
    if let Some((p, s)) = paths.iter().zip(&sources).find(|(_, s)| s.dim() != dim) {
        return Err(anyhow!(
            "{}: feature width {} differs from {dim}",
            p.display(),
            s.dim()
        ));
    }
    let combined = combine_splits(&sources.iter().map(|s| s.split.clone()).collect::<Vec<_>>())?;
    let mut rows = Vec::with_capacity(combined.train().len() * dim);
    for s in &sources {
        rows.extend(s.train.view().iter().copied());
    }
    let features = EmbeddingMatrix::from_vec(combined.train().len(), dim, rows)?;
    Ok(TrainSet::new(combined, features)?)
}

fn model_from_checkpoint(path: &Path) -> anyhow::Result<(LinearReIDModel, usize)> {
    let bundle = load_checkpoint(path)?;
    let shape = |name: &str| {
        bundle
            .params
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.value.dim())
            .ok_or_else(|| anyhow!("{}: no parameter '{name}'", path.display()))
    };
    let (in_dim, embed_dim) = shape("W_embed")?;
    let (_, classes) = shape("W_cls")?;
    let mut model = LinearReIDModel::new(in_dim, embed_dim, classes, 0);
    let compatible = model.params().len() == bundle.params.len()
        && model
            .params()
            .iter()
            .zip(&bundle.params)
            .all(|(a, b)| a.name == b.name && a.value.dim() == b.value.dim());
    if !compatible {
        return Err(anyhow!(
            "{}: parameters do not fit the linear model",
            path.display()
        ));
    }
    model.params_mut().clone_from_slice(&bundle.params);
    Ok((model, in_dim))
}

fn summaries(reports: &[(String, EvalReport)]) -> Vec<Summary<'_>> {
    reports
        .iter()
        .map(|(tag, r)| Summary::new(tag, r))
        .collect()
}

fn write_report(dir: &Path, reports: &[(String, EvalReport)]) -> anyhow::Result<PathBuf> {
    let path = dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&summaries(reports))?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn log_tail(dir: &Path, lines: usize) -> String {
    let text = fs::read_to_string(dir.join("log.jsonl")).unwrap_or_default();
    let all: Vec<&str> = text.lines().collect();
    all[all.len().saturating_sub(lines)..].join("\n")
}

fn test_only(config: &RunConfig, args: &TrainArgs) -> CliResult<()> {
    let Some(checkpoint) = &args.checkpoint else {
        usage_bail!("--test-only needs --checkpoint");
    };
    if config.targets.is_empty() {
        usage_bail!("no targets configured");
    }
    let (model, in_dim) = model_from_checkpoint(checkpoint).usage()?;
    config.engine.validate(&model.param_names()).usage()?;
    let targets = load_targets(&config.targets, Some(in_dim)).usage()?;

    let reports = run_test_only(&model, &targets, &config.engine).runtime()?;
    let report_path = match &config.engine.save_dir {
        Some(dir) => {
            fs::create_dir_all(dir).runtime()?;
            Some(write_report(dir, &reports).runtime()?)
        }
        None => None,
    };
    print_json(&json!({
        "checkpoint": checkpoint,
        "report_file": report_path,
        "results": summaries(&reports),
    }))
    .runtime()
}

pub fn run(args: TrainArgs) -> CliResult<()> {
    let mut config = RunConfig::load(&args.config).usage()?;
    config.apply(&args);
    if let Some(t) = &config.transform {
        t.validate().usage()?;
    }
    if args.test_only {
        return test_only(&config, &args);
    }
    if config.sources.is_empty() || config.targets.is_empty() {
        usage_bail!("both sources and targets must be non-empty");
    }
    let Some(save_dir) = config.engine.save_dir.clone() else {
        usage_bail!("save_dir must be set in the config or with --save-dir");
    };

    let train = load_train(&config.sources).usage()?;
    let dim = train.features().cols();
    let targets = load_targets(&config.targets, Some(dim)).usage()?;
    config.optimizer.validate().usage()?;
    let scheduler = config.scheduler.build(config.optimizer.lr).usage()?;
    if config.model.embed_dim == 0 {
        usage_bail!("model.embed_dim must be positive");
    }
    let model = LinearReIDModel::new(
        dim,
        config.model.embed_dim,
        train.split().num_train_pids(),
        config.engine.seed,
    );
    let optimizer = OptimizerState::new(config.optimizer, model.params()).usage()?;
    let mut engine = Engine::new(
        model,
        optimizer,
        scheduler,
        config.engine.clone(),
        config.sampler,
    )
    .usage()?;
    if let Some(path) = &args.checkpoint {
        engine.resume(load_checkpoint(path).usage()?).usage()?;
        log::info!(
            "resuming from {} at epoch {}",
            path.display(),
            engine.epoch()
        );
    }

    fs::create_dir_all(&save_dir).runtime()?;
    fs::write(
        save_dir.join("config.json"),
        serde_json::to_string_pretty(&config).runtime()?,
    )
    .runtime()?;
    let outcome = engine.run(&train, &targets).map_err(|e| {
        let tail = log_tail(&save_dir, 5);
        if !tail.is_empty() {
            eprintln!("last log lines:\n{tail}");
        }
        CliError::Runtime(e.into())
    })?;
    let reports = if outcome.last_reports.is_empty() {
        engine.evaluate(&targets).runtime()?
    } else {
        outcome.last_reports
    };
    let report_path = write_report(&save_dir, &reports).runtime()?;
    print_json(&json!({
        "save_dir": save_dir,
        "epochs": engine.epoch(),
        "num_train_pids": train.split().num_train_pids(),
        "checkpoint": save_dir.join("final.rckp"),
        "report_file": report_path,
        "results": summaries(&reports),
    }))
    .runtime()
}

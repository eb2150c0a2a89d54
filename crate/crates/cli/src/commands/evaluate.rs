use std::path::PathBuf;
use std::time::Instant;

use anyhow::anyhow;
use clap::Args;
use reidbench::dataman::load_manifest;
use reidbench::metrics::{distance_matrix, evaluate_rank, EvalOptions, DEFAULT_REPEATS};
use reidbench::{Metric, Protocol, Record};
use serde_json::json;

use crate::error::{CliResult, Phase};
use crate::features::{load_remb, per_record};
use crate::report::{print_json, Summary};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Query features (REMB), one row per query record or per frame.
    #[arg(long)]
    query: PathBuf,
    /// Gallery features (REMB), one row per gallery record or per frame.
    #[arg(long)]
    gallery: PathBuf,
    /// Manifest providing query and gallery labels.
    #[arg(long)]
    labels: PathBuf,
    /// euclidean_squared or cosine.
    #[arg(long, default_value = "euclidean_squared")]
    metric: Metric,
    /// standard or single_gallery_shot.
    #[arg(long, default_value = "standard")]
    protocol: Protocol,
    /// Sampling repetitions for single_gallery_shot.
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    max_rank: usize,
}

fn labels(records: &[Record]) -> (Vec<u32>, Vec<u32>) {
    (
        records.iter().map(Record::pid).collect(),
        records.iter().map(Record::camid).collect(),
    )
}

pub fn run(args: EvaluateArgs) -> CliResult<()> {
    let split = load_manifest(&args.labels).usage()?;
    let query = per_record(load_remb(&args.query).usage()?, split.query(), "query").usage()?;
    let gallery = per_record(
        load_remb(&args.gallery).usage()?,
        split.gallery(),
        "gallery",
    )
    .usage()?;
    if query.cols() != gallery.cols() {
        return Err(anyhow!(
            "query width {} differs from gallery width {}",
            query.cols(),
            gallery.cols()
        ))
        .usage();
    }
    let options = EvalOptions {
        protocol: args.protocol,
        max_rank: args.max_rank,
        repeats: args.repeats,
        seed: args.seed,
    };
    if args.max_rank == 0 || args.repeats == 0 {
        return Err(anyhow!("--max-rank and --repeats must be at least 1")).usage();
    }

    let start = Instant::now();
    let dist = distance_matrix(&query, &gallery, args.metric).usage()?;
    let (q_pids, q_camids) = labels(split.query());
    let (g_pids, g_camids) = labels(split.gallery());
    let report = evaluate_rank(&dist, &q_pids, &q_camids, &g_pids, &g_camids, &options).usage()?;
    let wall = start.elapsed().as_secs_f64();
    log::info!(
        "evaluated {}x{} in {wall:.3} s",
        query.rows(),
        gallery.rows()
    );

    let summary = Summary::new(split.dataset_tag(), &report);
    print_json(&json!({
        "dataset_tag": summary.dataset_tag,
        "metric": args.metric,
        "num_query": query.rows(),
        "num_gallery": gallery.rows(),
        "ranks": summary.ranks,
        "map": summary.map,
        "wall_time_secs": wall,
        "report": summary.report,
    }))
    .runtime()
}

use std::path::PathBuf;

use clap::Args;
use reidbench::dataman::load_manifest;
use reidbench::metrics::distance_matrix;
use reidbench::viz::visrank;
use reidbench::Metric;
use serde_json::json;

use crate::error::{usage_bail, CliResult, Phase};
use crate::features::{load_remb, per_record};
use crate::report::print_json;

#[derive(Debug, Args)]
pub struct VisrankArgs {
    /// Query features (REMB).
    #[arg(long)]
    query: PathBuf,
    /// Gallery features (REMB).
    #[arg(long)]
    gallery: PathBuf,
    /// Manifest with the query and gallery records.
    #[arg(long)]
    labels: PathBuf,
    /// Gallery entries shown per query.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    out_dir: PathBuf,
    /// Directory that relative image references are resolved against.
    #[arg(long)]
    image_root: Option<PathBuf>,
    #[arg(long, default_value = "euclidean_squared")]
    metric: Metric,
}

pub fn run(args: VisrankArgs) -> CliResult<()> {
    if args.k == 0 {
        usage_bail!("--k must be at least 1");
    }
    let split = load_manifest(&args.labels).usage()?;
    let query = per_record(load_remb(&args.query).usage()?, split.query(), "query").usage()?;
    let gallery = per_record(
        load_remb(&args.gallery).usage()?,
        split.gallery(),
        "gallery",
    )
    .usage()?;
    let dist = distance_matrix(&query, &gallery, args.metric).usage()?;
    let out = visrank(
        &dist,
        split.query(),
        split.gallery(),
        args.k,
        &args.out_dir,
        args.image_root.as_deref(),
    )
    .runtime()?;
    if out.placeholders > 0 {
        log::warn!(
            "{} images were unreadable and drawn as placeholders",
            out.placeholders
        );
    }
    let rows: Vec<_> = out
        .rows
        .iter()
        .map(|(path, list)| json!({ "image": path, "ranked": list }))
        .collect();
    print_json(&json!({ "index": out.index, "placeholders": out.placeholders, "rows": rows }))
        .runtime()
}

use std::path::PathBuf;

use clap::Args;
use reidbench::dataman::{feature_sidecars, generate_synthetic, SyntheticSpec};
use serde_json::json;

use crate::error::{CliResult, Phase};
use crate::report::print_json;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out_dir: PathBuf,
    /// Base name of the manifest and feature files.
    #[arg(long, default_value = "synthetic")]
    name: String,
    #[arg(long, default_value_t = 20)]
    num_pids: usize,
    #[arg(long, default_value_t = 2)]
    cams: usize,
    /// Instances per identity per camera.
    #[arg(long, default_value_t = 4)]
    instances: usize,
    #[arg(long, default_value_t = 64)]
    embed_dim: usize,
    /// Noise norm relative to the cluster-centre norm.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset tag written into every record.
    #[arg(long, default_value = "synthetic")]
    tag: String,
}

pub fn run(args: SynthArgs) -> CliResult<()> {
    let spec = SyntheticSpec {
        num_pids: args.num_pids,
        cams: args.cams,
        instances_per_pid_per_cam: args.instances,
        embed_dim: args.embed_dim,
        cluster_noise: args.noise,
        seed: args.seed,
        dataset_tag: args.tag,
    };
    let data = generate_synthetic(&spec).usage()?;
    let manifest = data.write(&args.out_dir, &args.name).runtime()?;
    let [train, query, gallery] = feature_sidecars(&manifest);
    print_json(&json!({
        "manifest": manifest,
        "features": { "train": train, "query": query, "gallery": gallery },
        "num_train": data.split.train().len(),
        "num_query": data.split.query().len(),
        "num_gallery": data.split.gallery().len(),
        "num_train_pids": data.split.num_train_pids(),
    }))
    .runtime()
}

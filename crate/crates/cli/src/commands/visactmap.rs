use std::path::PathBuf;

use clap::Args;
use ndarray::Array3;
use reidbench::viz::{activation_map, raw_map_path, read_image, visactmap};
use serde_json::json;

use crate::error::{usage_bail, CliResult, Phase};
use crate::features::load_remb;
use crate::report::print_json;

#[derive(Debug, Args)]
pub struct VisactmapArgs {
    /// Feature map as REMB with `channels * height` rows and `width` columns,
    /// channel-major.
    #[arg(long)]
    features: PathBuf,
    /// Number of channels stacked in the feature file.
    #[arg(long)]
    channels: usize,
    /// Image to overlay.
    #[arg(long)]
    image: PathBuf,
    /// Output PNG; the raw normalized map is written next to it as `.remb`.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: VisactmapArgs) -> CliResult<()> {
    let flat = load_remb(&args.features).usage()?;
    if args.channels == 0 || flat.rows() % args.channels != 0 {
        usage_bail!(
            "{} feature rows cannot be split into {} channels",
            flat.rows(),
            args.channels
        );
    }
    let (c, h, w) = (args.channels, flat.rows() / args.channels, flat.cols());
    let fmap: Array3<f32> = flat.into_inner().into_shape_with_order((c, h, w)).usage()?;
    // Computed up front so an all-zero map is rejected before writing anything.
    activation_map(&fmap).usage()?;
    let image = read_image(&args.image)
        .map_err(anyhow::Error::msg)
        .usage()?;
    visactmap(&fmap, &image, &args.out).runtime()?;
    print_json(&json!({
        "overlay": args.out,
        "raw_map": raw_map_path(&args.out),
        "map_shape": [h, w],
        "image_shape": [image.height(), image.width()],
    }))
    .runtime()
}

use std::path::PathBuf;

use clap::Args;
use reidbench::dataman::load_manifest;
use reidbench::{DatasetSplit, Modality, Record};
use serde::Serialize;

use crate::error::{CliResult, Phase};
use crate::report::print_json;

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset manifest.
    manifest: PathBuf,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Serialize)]
struct Row {
    split: &'static str,
    records: usize,
    pids: usize,
    cams: usize,
    frames: usize,
}

fn row(split: &'static str, records: &[Record]) -> Row {
    Row {
        split,
        records: records.len(),
        pids: DatasetSplit::distinct_pids(records),
        cams: DatasetSplit::distinct_cams(records),
        frames: records.iter().map(Record::num_frames).sum(),
    }
}

fn table(rows: &[Row], video: bool) -> String {
    let mut out = format!(
        "{:<10}{:>10}{:>10}{:>10}",
        "split", "records", "pids", "cams"
    );
    if video {
        out.push_str(&format!("{:>10}", "frames"));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:<10}{:>10}{:>10}{:>10}",
            r.split, r.records, r.pids, r.cams
        ));
        if video {
            out.push_str(&format!("{:>10}", r.frames));
        }
        out.push('\n');
    }
    out
}

pub fn run(args: StatsArgs) -> CliResult<()> {
    let split = load_manifest(&args.manifest).usage()?;
    let rows = [
        row("train", split.train()),
        row("query", split.query()),
        row("gallery", split.gallery()),
    ];
    if args.json {
        print_json(&rows).runtime()
    } else {
        print!("{}", table(&rows, split.modality() == Modality::Video));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_columns_are_fixed_width() {
        let records = vec![Record::image("a", 3, 0, "t"), Record::image("b", 3, 1, "t")];
        let text = table(&[row("train", &records)], false);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0].len(), lines[1].len());
        assert!(lines[1].ends_with("         2         1         2"));
    }
}

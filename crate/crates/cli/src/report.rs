use std::collections::BTreeMap;

use reidbench::metrics::REPORTED_RANKS;
use reidbench::EvalReport;
use serde::Serialize;

/// An evaluation report plus the headline numbers pulled out of it.
#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub dataset_tag: &'a str,
    pub ranks: BTreeMap<String, f64>,
    pub map: f64,
    pub report: &'a EvalReport,
}

impl<'a> Summary<'a> {
    pub fn new(dataset_tag: &'a str, report: &'a EvalReport) -> Self {
        let ranks = REPORTED_RANKS
            .iter()
            .filter_map(|&r| report.cmc_at(r).map(|v| (format!("rank{r}"), v)))
            .collect();
        Self {
            dataset_tag,
            ranks,
            map: report.map,
            report,
        }
    }
}

pub fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

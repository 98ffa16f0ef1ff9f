//! Result files: `results.csv` and `records.jsonl`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::campaign::{PointSummary, TrialRecord};
use crate::turbo::Receiver;
use crate::{Error, Result};

pub const RESULTS_HEADER: [&str; 8] = [
    "receiver",
    "K",
    "trials",
    "activity_err",
    "nmse_db",
    "bler",
    "bler_ci95",
    "wall_s",
];

/// One parsed line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub receiver: Receiver,
    #[serde(rename = "K")]
    pub k: usize,
    pub trials: usize,
    pub activity_err: f64,
    pub nmse_db: f64,
    pub bler: f64,
    pub bler_ci95: f64,
    /// Seconds, or `NA` when timing was off.
    pub wall_s: String,
}

pub fn write_results_csv<W: Write>(w: W, summary: &[PointSummary]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for p in summary {
        out.write_record([
            p.receiver.name().to_string(),
            p.k.to_string(),
            p.trials.to_string(),
            format!("{:.6e}", p.activity_err),
            format!("{:.4}", p.nmse_db),
            format!("{:.6e}", p.bler),
            format!("{:.6e}", p.bler_ci95),
            p.wall_s.map_or_else(|| "NA".to_string(), |s| format!("{s:.3}")),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_results_csv<R: std::io::Read>(r: R) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(csv_err))
        .collect()
}

pub fn write_records_jsonl<W: Write>(mut w: W, records: &[TrialRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_records_jsonl<R: BufRead>(r: R) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("results.csv: {other:?}")),
    }
}

/// Write `results.csv` and `records.jsonl` into `dir`, creating it if
/// needed. Returns the two paths.
pub fn write_campaign(
    dir: &std::path::Path,
    campaign: &super::Campaign,
) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let results = dir.join("results.csv");
    let records = dir.join("records.jsonl");
    write_results_csv(std::io::BufWriter::new(std::fs::File::create(&results)?), &campaign.summary)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(&records)?);
    write_records_jsonl(&mut w, &campaign.records)?;
    w.flush()?;
    Ok((results, records))
}

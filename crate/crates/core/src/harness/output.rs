//! `records.csv` and `summary.json` writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{ExperimentSummary, ReplicationRecord};
use crate::error::Result;

pub const RECORD_COLUMNS: [&str; 10] = [
    "rep",
    "method",
    "j",
    "feature_key",
    "stat",
    "p",
    "rejected",
    "matched_true",
    "aic_final",
    "status",
];

/// Writes one row per record in the given order. Wall times are left out so
/// that the file depends only on the experiment specification.
pub fn write_records_csv(path: impl AsRef<Path>, records: &[ReplicationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record([
            r.rep.to_string(),
            r.method.to_string(),
            r.j.to_string(),
            r.feature_key.clone(),
            r.stat.to_string(),
            r.p.to_string(),
            r.rejected.to_string(),
            r.matched_true.to_string(),
            r.aic_final.to_string(),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json(path: impl AsRef<Path>, summary: &ExperimentSummary) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, summary)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

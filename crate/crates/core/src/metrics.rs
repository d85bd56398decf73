//! Metrics and summary file formats.
//!
//! Metrics are CSV with a fixed column set; reals carry 17 significant
//! digits so reruns are byte-comparable. Summaries and verification reports
//! are line-delimited JSON.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{CommStats, RunRecord, Termination};
use crate::error::{Error, Result};

pub const METRICS_COLUMNS: [&str; 10] = [
    "round",
    "samples_processed",
    "local_batch_size",
    "lr",
    "loss_avg_iterate",
    "grad_norm_sq",
    "variance_estimate",
    "test_statistic",
    "test_passed",
    "wallclock_s",
];

/// 17 significant digits; round-trips exactly.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_metrics(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(METRICS_COLUMNS)?;
    for r in records {
        writer.write_record([
            r.round.to_string(),
            r.samples_processed.to_string(),
            r.local_batch_size.to_string(),
            format_real(r.lr),
            format_real(r.loss_avg_iterate),
            format_real(r.grad_norm_sq),
            format_real(r.variance_estimate),
            format_real(r.test_statistic),
            r.test_passed.to_string(),
            format_real(r.wallclock_s),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(row: usize, column: &str, value: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| {
        Error::Schema(format!(
            "row {row}, column `{column}`: cannot parse `{value}`"
        ))
    })
}

/// Read a metrics file, verifying the header names and order exactly.
pub fn read_metrics(path: &Path) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| Error::Schema(e.to_string()))?
        .clone();
    for (pos, expected) in METRICS_COLUMNS.iter().enumerate() {
        match header.get(pos) {
            Some(found) if found == *expected => {}
            Some(found) => {
                return Err(Error::Schema(format!(
                    "expected column `{expected}` at position {pos}, found `{found}`"
                )))
            }
            None => {
                return Err(Error::Schema(format!(
                    "missing column `{expected}` at position {pos}"
                )))
            }
        }
    }
    if header.len() != METRICS_COLUMNS.len() {
        return Err(Error::Schema(format!(
            "unexpected extra column `{}`",
            header.get(METRICS_COLUMNS.len()).unwrap_or("")
        )));
    }
    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Schema(e.to_string()))?;
        let get = |col: usize| row.get(col).unwrap_or("");
        records.push(RunRecord {
            round: parse_field(idx, "round", get(0))?,
            samples_processed: parse_field(idx, "samples_processed", get(1))?,
            local_batch_size: parse_field(idx, "local_batch_size", get(2))?,
            lr: parse_field(idx, "lr", get(3))?,
            loss_avg_iterate: parse_field(idx, "loss_avg_iterate", get(4))?,
            grad_norm_sq: parse_field(idx, "grad_norm_sq", get(5))?,
            variance_estimate: parse_field(idx, "variance_estimate", get(6))?,
            test_statistic: parse_field(idx, "test_statistic", get(7))?,
            test_passed: parse_field(idx, "test_passed", get(8))?,
            wallclock_s: parse_field(idx, "wallclock_s", get(9))?,
        });
    }
    Ok(records)
}

/// One-line JSON run summary. Wall-clock lives here, outside the
/// byte-deterministic metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Canonical echo of the effective configuration.
    pub config_text: String,
    pub final_loss: f64,
    pub rounds: u64,
    pub mean_batch_size: f64,
    pub samples_processed: u64,
    pub steps_per_worker: u64,
    pub termination: Termination,
    pub comm: CommStats,
    pub wallclock_s: f64,
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<()> {
    let mut file = File::create(path)?;
    let line = serde_json::to_string(summary)
        .map_err(|e| Error::Schema(format!("summary serialization: {e}")))?;
    writeln!(file, "{line}")?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let file = File::open(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let line = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{}: empty summary", path.display())))??;
    serde_json::from_str(&line).map_err(|e| Error::Schema(format!("summary line: {e}")))
}

/// One verification check: name, status, value against tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyCheck {
    pub name: String,
    pub status: CheckStatus,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl VerifyCheck {
    pub fn pass(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        VerifyCheck {
            name: name.into(),
            status: CheckStatus::Pass,
            value,
            tolerance,
            detail,
        }
    }

    pub fn fail(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        VerifyCheck {
            name: name.into(),
            status: CheckStatus::Fail,
            value,
            tolerance,
            detail,
        }
    }

    pub fn skipped(name: &str, reason: String) -> Self {
        VerifyCheck {
            name: name.into(),
            status: CheckStatus::Skipped,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail: reason,
        }
    }

    pub fn gate(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        if value <= tolerance {
            Self::pass(name, value, tolerance, detail)
        } else {
            Self::fail(name, value, tolerance, detail)
        }
    }
}

pub fn write_report(path: &Path, checks: &[VerifyCheck]) -> Result<()> {
    let mut file = File::create(path)?;
    for check in checks {
        let line = serde_json::to_string(check)
            .map_err(|e| Error::Schema(format!("report serialization: {e}")))?;
        writeln!(file, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn record(round: u64) -> RunRecord {
        RunRecord {
            round,
            samples_processed: 1024 * (round + 1),
            local_batch_size: 64,
            lr: 0.05,
            loss_avg_iterate: 1.0 / (round + 1) as f64,
            grad_norm_sq: 0.5,
            variance_estimate: 2.0,
            test_statistic: 1.5,
            test_passed: true,
            wallclock_s: 0.0,
        }
    }

    #[test]
    fn metrics_round_trip_and_bytes_stable() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let records: Vec<RunRecord> = (0..4).map(record).collect();
        write_metrics(&path, &records).unwrap();
        let bytes1 = std::fs::read(&path).unwrap();
        let parsed = read_metrics(&path).unwrap();
        assert_eq!(parsed, records);
        write_metrics(&path, &parsed).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes1);
        let header = String::from_utf8(bytes1).unwrap();
        assert!(header.starts_with(&METRICS_COLUMNS.join(",")));
    }

    #[test]
    fn foreign_header_names_offending_column() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        std::fs::write(&path, "round,samples_processed,batch\n1,2,3\n").unwrap();
        let err = read_metrics(&path).unwrap_err();
        assert!(err.to_string().contains("local_batch_size"), "{err}");
    }

    #[test]
    fn non_finite_reals_survive_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let mut r = record(0);
        r.test_statistic = f64::INFINITY;
        write_metrics(&path, &[r]).unwrap();
        let parsed = read_metrics(&path).unwrap();
        assert!(parsed[0].test_statistic.is_infinite());
    }
}

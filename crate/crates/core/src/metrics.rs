//! Per-round metrics records, the run summary, and their file formats.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// Column order of `metrics.csv`. Frozen: append new columns at the end.
pub const CSV_COLUMNS: [&str; 17] = [
    "round",
    "sim_time_s",
    "round_time_s",
    "train_loss",
    "test_accuracy",
    "test_loss",
    "target_levels",
    "mean_levels",
    "ctrl_sign",
    "grad_norm",
    "bits",
    "levels",
    "t_cp",
    "t_cm",
    "t_down",
    "uploaded_bytes_cum",
    "uploaded_bytes_total",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Simulated clock at the end of the round.
    pub sim_time_s: f64,
    pub round_time_s: f64,
    /// Data-weighted loss of the new global model over client training sets.
    pub train_loss: f64,
    pub test_accuracy: f64,
    pub test_loss: f64,
    /// Controller's continuous mean-level target, for adaptive strategies.
    pub target_levels: Option<f64>,
    /// Mean of the levels actually assigned, for quantized uploads.
    pub mean_levels: Option<f64>,
    pub ctrl_sign: Option<i8>,
    /// Norm of this round's aggregate.
    pub grad_norm: f64,
    pub bits: Vec<u32>,
    pub levels: Vec<Option<u32>>,
    pub t_cp: Vec<f64>,
    pub t_cm: Vec<f64>,
    pub t_down: Vec<f64>,
    /// Bytes each client has uploaded so far.
    pub uploaded_bytes_cum: Vec<u64>,
    pub uploaded_bytes_total: u64,
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(";")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RoundRecord {
    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.round.to_string(),
            self.sim_time_s.to_string(),
            self.round_time_s.to_string(),
            self.train_loss.to_string(),
            self.test_accuracy.to_string(),
            self.test_loss.to_string(),
            opt(self.target_levels),
            opt(self.mean_levels),
            opt(self.ctrl_sign),
            self.grad_norm.to_string(),
            join(&self.bits, u32::to_string),
            join(&self.levels, |l| opt(*l)),
            join(&self.t_cp, f64::to_string),
            join(&self.t_cm, f64::to_string),
            join(&self.t_down, f64::to_string),
            join(&self.uploaded_bytes_cum, u64::to_string),
            self.uploaded_bytes_total.to_string(),
        ]
    }
}

pub fn write_csv<W: Write>(out: W, records: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(format!("writing metrics: {e}"));
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in records {
        w.write_record(r.csv_fields()).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Format(format!("writing metrics: {e}")))?;
    Ok(())
}

pub fn save_csv(path: &Path, records: &[RoundRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Reached,
    CapReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub strategy: String,
    pub status: RunStatus,
    pub rounds: usize,
    pub total_time_s: f64,
    /// Mean over clients of bytes uploaded, in gigabytes (1e9 bytes).
    pub avg_uploaded_gb: f64,
    pub total_uploaded_bytes: u64,
    pub final_train_loss: Option<f64>,
    pub final_test_accuracy: Option<f64>,
    /// Whether the 32-bit norm of each quantized upload is counted.
    pub norm_header_counted: bool,
}

impl Summary {
    pub fn from_records(strategy: &str, status: RunStatus, records: &[RoundRecord]) -> Self {
        let last = records.last();
        let (total, avg) = last.map_or((0, 0.0), |r| {
            let n = r.uploaded_bytes_cum.len().max(1) as f64;
            (r.uploaded_bytes_total, r.uploaded_bytes_total as f64 / n / 1e9)
        });
        Summary {
            schema_version: METRICS_SCHEMA_VERSION,
            strategy: strategy.to_string(),
            status,
            rounds: records.len(),
            total_time_s: last.map_or(0.0, |r| r.sim_time_s),
            avg_uploaded_gb: avg,
            total_uploaded_bytes: total,
            final_train_loss: last.map(|r| r.train_loss),
            final_test_accuracy: last.map(|r| r.test_accuracy),
            norm_header_counted: true,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> RoundRecord {
        RoundRecord {
            round: 0,
            sim_time_s: 1.5,
            round_time_s: 1.5,
            train_loss: 2.25,
            test_accuracy: 0.5,
            test_loss: 2.5,
            target_levels: Some(255.0),
            mean_levels: Some(255.0),
            ctrl_sign: None,
            grad_norm: 3.0,
            bits: vec![8, 7],
            levels: vec![Some(255), Some(127)],
            t_cp: vec![1.0, 1.25],
            t_cm: vec![0.125, 0.25],
            t_down: vec![0.0, 0.0],
            uploaded_bytes_cum: vec![100, 90],
            uploaded_bytes_total: 190,
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[record()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "0,1.5,1.5,2.25,0.5,2.5,255,255,,3,8;7,255;127,1;1.25,0.125;0.25,0;0,100;90,190"
        );
    }

    #[test]
    fn summary_totals_match_records() {
        let s = Summary::from_records("qsgd", RunStatus::CapReached, &[record()]);
        assert_eq!(s.rounds, 1);
        assert_eq!(s.total_time_s, 1.5);
        assert_eq!(s.total_uploaded_bytes, 190);
        assert_eq!(s.avg_uploaded_gb, 95e-9);
        let empty = Summary::from_records("qsgd", RunStatus::CapReached, &[]);
        assert_eq!((empty.rounds, empty.total_time_s), (0, 0.0));
    }
}

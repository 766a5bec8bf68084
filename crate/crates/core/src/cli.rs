//! Experiment driver operations behind the `adagq` binary: run a config
//! into an output directory, compare finished runs, sweep a grid, and
//! replay a run from its recorded trace.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::engine::{Simulation, Strategy};
use crate::error::{Error, Result};
use crate::metrics::{save_csv, RunStatus, Summary};
use crate::simnet::NetworkTrace;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_ECHO_FILE: &str = "config_echo.json";
pub const TRACE_FILE: &str = "trace.json";

/// Process exit code for a finished run.
pub fn exit_code(status: RunStatus) -> i32 {
    match status {
        RunStatus::Reached => 0,
        RunStatus::CapReached => 2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub version: String,
    pub config: ExperimentConfig,
}

/// Runs `cfg` and writes `metrics.csv`, `summary.json`, `config_echo.json`
/// and `trace.json` into `out`. A recorded trace can be supplied to replay
/// network and compute conditions.
pub fn run_to_dir(cfg: &ExperimentConfig, out: &Path, trace: Option<NetworkTrace>) -> Result<Summary> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let sim = match trace {
        Some(t) => Simulation::with_trace(cfg, t)?,
        None => Simulation::new(cfg)?,
    };
    let echo = ConfigEcho {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
    };
    let echo_path = out.join(CONFIG_ECHO_FILE);
    std::fs::write(&echo_path, serde_json::to_string_pretty(&echo)?).map_err(|e| Error::io(&echo_path, e))?;
    sim.trace().save(&out.join(TRACE_FILE))?;

    let result = sim.run()?;
    save_csv(&out.join(METRICS_FILE), &result.records)?;
    result.summary.save(&out.join(SUMMARY_FILE))?;
    Ok(result.summary)
}

/// Re-runs the experiment recorded in `from` under its exact trace.
pub fn replay(from: &Path, out: &Path) -> Result<Summary> {
    let echo_path = from.join(CONFIG_ECHO_FILE);
    let text = std::fs::read_to_string(&echo_path).map_err(|e| Error::io(&echo_path, e))?;
    let echo: ConfigEcho = serde_json::from_str(&text)?;
    let trace = NetworkTrace::load(&from.join(TRACE_FILE))?;
    run_to_dir(&echo.config, out, Some(trace))
}

fn load_summary(dir: &Path) -> Result<Summary> {
    let path = dir.join(SUMMARY_FILE);
    if !path.is_file() {
        return Err(Error::InvalidInput(format!(
            "no {SUMMARY_FILE} in run directory {}",
            dir.display()
        )));
    }
    Summary::load(&path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub dir: PathBuf,
    pub summary: Summary,
    /// First run's value divided by this run's: above 1 means this run
    /// needed less.
    pub rounds_ratio: f64,
    pub uploaded_ratio: f64,
    pub time_ratio: f64,
}

fn ratio(base: f64, value: f64) -> f64 {
    if value == 0.0 {
        if base == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        base / value
    }
}

/// Loads each run's summary and computes ratios against the first.
pub fn compare(dirs: &[PathBuf]) -> Result<Vec<ComparisonRow>> {
    let summaries = dirs.iter().map(|d| load_summary(d)).collect::<Result<Vec<_>>>()?;
    let base = summaries
        .first()
        .ok_or_else(|| Error::InvalidInput("compare needs at least one run directory".into()))?
        .clone();
    Ok(dirs
        .iter()
        .zip(summaries)
        .map(|(dir, s)| ComparisonRow {
            dir: dir.clone(),
            rounds_ratio: ratio(base.rounds as f64, s.rounds as f64),
            uploaded_ratio: ratio(base.avg_uploaded_gb, s.avg_uploaded_gb),
            time_ratio: ratio(base.total_time_s, s.total_time_s),
            summary: s,
        })
        .collect())
}

pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<32} {:<14} {:<11} {:>7} {:>8} {:>14} {:>8} {:>12} {:>8}",
        "run", "strategy", "status", "rounds", "", "uploaded_gb", "", "total_time_s", ""
    );
    for r in rows {
        let s = &r.summary;
        let status = match s.status {
            RunStatus::Reached => "reached",
            RunStatus::CapReached => "cap_reached",
        };
        let _ = writeln!(
            out,
            "{:<32} {:<14} {:<11} {:>7} {:>8} {:>14.6} {:>8} {:>12.2} {:>8}",
            r.dir.display(),
            s.strategy,
            status,
            s.rounds,
            format!("{:.2}×", r.rounds_ratio),
            s.avg_uploaded_gb,
            format!("{:.2}×", r.uploaded_ratio),
            s.total_time_s,
            format!("{:.2}×", r.time_ratio),
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub sigma_d: Vec<f64>,
    pub sigma_r: Vec<f64>,
    pub strategies: Vec<Strategy>,
}

/// Runs the cartesian product of the grid, one subdirectory per cell.
/// Returns the directories with their summaries.
pub fn sweep(base: &ExperimentConfig, grid: &SweepGrid, out: &Path) -> Result<Vec<(PathBuf, Summary)>> {
    let mut results = Vec::new();
    for &strategy in &grid.strategies {
        for &sd in &grid.sigma_d {
            for &sr in &grid.sigma_r {
                let mut cfg = base.clone();
                cfg.strategy = strategy;
                cfg.sigma_d = sd;
                cfg.sigma_r = Some(sr);
                cfg.validate()?;
                let dir = out.join(format!("{}_sd{sd}_sr{sr}", strategy.name()));
                let summary = run_to_dir(&cfg, &dir, None)?;
                results.push((dir, summary));
            }
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_summary(dir: &Path, time: f64) {
        std::fs::create_dir_all(dir).unwrap();
        let mut s = Summary::from_records("qsgd", RunStatus::Reached, &[]);
        s.rounds = 10;
        s.total_time_s = time;
        s.avg_uploaded_gb = 0.5;
        s.save(&dir.join(SUMMARY_FILE)).unwrap();
    }

    #[test]
    fn comparing_a_run_with_itself_gives_unit_ratios() {
        let tmp = tempfile::tempdir().unwrap();
        let a = tmp.path().join("a");
        write_summary(&a, 100.0);
        let rows = compare(&[a.clone(), a]).unwrap();
        for r in &rows {
            assert_eq!((r.rounds_ratio, r.uploaded_ratio, r.time_ratio), (1.0, 1.0, 1.0));
        }
        assert!(format_comparison(&rows).contains("1.00×"));
    }

    #[test]
    fn halved_time_gives_two() {
        let tmp = tempfile::tempdir().unwrap();
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        write_summary(&a, 100.0);
        write_summary(&b, 50.0);
        let rows = compare(&[a, b]).unwrap();
        assert_eq!(rows[1].time_ratio, 2.0);
        assert!(format_comparison(&rows).contains("2.00×"));
    }

    #[test]
    fn missing_summary_names_the_directory() {
        let tmp = tempfile::tempdir().unwrap();
        let missing = tmp.path().join("nowhere");
        let e = compare(&[missing.clone()]).unwrap_err();
        assert!(e.to_string().contains(&missing.display().to_string()), "{e}");
        assert!(compare(&[]).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(RunStatus::Reached), 0);
        assert_eq!(exit_code(RunStatus::CapReached), 2);
    }
}

//! `adagq`: run, compare, sweep and replay federated training experiments.
//!
//! Exit status: 0 when the run reached its target, 2 when it stopped at the
//! round cap, 1 on any error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adagq::cli::{compare, exit_code, format_comparison, replay, run_to_dir, sweep, SweepGrid};
use adagq::config::ExperimentConfig;
use adagq::engine::Strategy;
use adagq::metrics::{RunStatus, Summary};
use adagq::Result;

#[derive(Parser)]
#[command(name = "adagq", version, about = "Adaptive gradient quantization FL simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Dotted `key=value` override, applied after the file. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config, &self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(RunArgs),
    /// Side-by-side table of finished runs, with ratios against the first.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Run every combination of strategies, sigma_d and sigma_r.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        sigma_d: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "4")]
        sigma_r: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "adagq,qsgd")]
        strategies: Vec<Strategy>,
    },
    /// Re-run a finished experiment under its recorded trace.
    Replay {
        /// Directory of the run to replay.
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn report(summary: &Summary) -> i32 {
    println!("{}", serde_json::to_string_pretty(summary).unwrap_or_default());
    exit_code(summary.status)
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(args) => Ok(report(&run_to_dir(&args.load()?, &args.out, None)?)),
        Command::Replay { from, out } => Ok(report(&replay(&from, &out)?)),
        Command::Compare { dirs } => {
            print!("{}", format_comparison(&compare(&dirs)?));
            Ok(0)
        }
        Command::Sweep {
            run,
            sigma_d,
            sigma_r,
            strategies,
        } => {
            let grid = SweepGrid {
                sigma_d,
                sigma_r,
                strategies,
            };
            let results = sweep(&run.load()?, &grid, &run.out)?;
            let dirs: Vec<PathBuf> = results.iter().map(|(d, _)| d.clone()).collect();
            print!("{}", format_comparison(&compare(&dirs)?));
            let all_reached = results.iter().all(|(_, s)| s.status == RunStatus::Reached);
            Ok(if all_reached { 0 } else { 2 })
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

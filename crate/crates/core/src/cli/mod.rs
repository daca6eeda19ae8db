//! The `usfan` command line: one TOML config per experiment, one directory per run.
//!
//! A run directory collects `config.resolved.toml`, `source.ckpt`,
//! `source_metrics.csv`, `posterior.json`, `adapted.ckpt`, `adapt_log.csv`,
//! `eval_metrics.csv`, `grid.csv`, `entropy_hist.csv` and `sweep.csv`.
//! Exit codes: 0 success, 1 usage, 2 data, 3 numerical failure.

mod commands;
mod config;

pub use config::{DataConfig, EvalConfig, EvalMode, RunConfig, RunData, SweepConfig, OUT_ROOT_ENV};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "usfan", version, about = "Uncertainty-guided source-free adaptation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Overrides the run directory from the config.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Network checkpoint; defaults to `adapted.ckpt` in the run directory.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Head posterior; defaults to `posterior.json` in the run directory.
    #[arg(long)]
    pub posterior: Option<PathBuf>,
    /// MAP softmax or Laplace predictive; defaults to `eval.mode`.
    #[arg(long, value_enum)]
    pub mode: Option<EvalMode>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the source model and write `source.ckpt` and `source_metrics.csv`.
    TrainSource {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fit the last-layer Laplace posterior and write `posterior.json`.
    FitLaplace {
        #[command(flatten)]
        run: RunArgs,
        /// Defaults to `source.ckpt` in the run directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Adapt on the target data and write `adapted.ckpt` and `adapt_log.csv`.
    Adapt {
        #[command(flatten)]
        run: RunArgs,
        /// Defaults to `source.ckpt` in the run directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Defaults to `posterior.json` in the run directory.
        #[arg(long)]
        posterior: Option<PathBuf>,
        /// Unit weights (SHOT-IM); no posterior needed.
        #[arg(long)]
        baseline: bool,
    },
    /// Score a model on labelled target data and write `eval_metrics.csv`.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write the decision surface of a 2-D model to `grid.csv`.
    Grid {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write entropy histograms of correct and incorrect predictions to `entropy_hist.csv`.
    Entropy {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Run both adaptation modes across shift scales and seeds; write `sweep.csv`.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! The `vista` command line: simulate, ingest, fit, assign, network,
//! outcomes and the end-to-end pipeline.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{FitArgs, NetworkArgs, RulesArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration; exit code 2.
    Usage(String),
    /// Data, model or I/O failure; exit code 1.
    Data(vista_core::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<vista_core::Error> for CliError {
    fn from(e: vista_core::Error) -> Self {
        CliError::Data(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vista", version, about = "Clustering of irregular emotion time series with mixtures of state-space models")]
pub struct Cli {
    /// JSON configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic cohort with ground-truth labels, assessments and covariates.
    Simulate {
        /// `paper-shaped` or `well-separated`.
        #[arg(long)]
        preset: Option<String>,
        /// Number of series.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate inputs and apply the cohort eligibility rules.
    Ingest {
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        assessments: Option<PathBuf>,
        #[arg(long)]
        diagnoses: Option<PathBuf>,
        /// Keep only talk turns inside assessment windows.
        #[arg(long)]
        anchor: bool,
        #[command(flatten)]
        rules: RulesArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a mixture of state-space models.
    Fit {
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        fit: FitArgs,
        /// Ground-truth labels CSV to score the clustering against (ARI).
        #[arg(long)]
        score: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assign series to the clusters of a fitted model.
    Assign {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Temporal networks and out-expected-influence per cluster.
    Network {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        network: NetworkArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Outcome labels, logistic regressions and item comparisons.
    Outcomes {
        #[arg(long)]
        assessments: Option<PathBuf>,
        /// Cluster labels CSV (`series_id,cluster`).
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        covariates: Option<PathBuf>,
        /// Do not adjust for covariates even when they are given.
        #[arg(long)]
        unadjusted: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every stage in sequence, with a manifest.
    Pipeline {
        /// Simulate the input cohort from this preset instead of reading files.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: Option<u64>,
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        assessments: Option<PathBuf>,
        #[arg(long)]
        diagnoses: Option<PathBuf>,
        #[arg(long)]
        covariates: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        anchor: bool,
        #[arg(long)]
        unadjusted: bool,
        #[command(flatten)]
        rules: RulesArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        network: NetworkArgs,
        /// Reuse the fitted model when the configuration hash is unchanged.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

/// Runs one invocation and returns the number of worker threads used.
pub fn run(cli: Cli) -> Result<usize, CliError> {
    let file = config::load_config(cli.config.as_deref())?;
    let threads = match cli.threads.or(file.threads) {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| commands::dispatch(cli.command, &file, threads))?;
    Ok(threads)
}

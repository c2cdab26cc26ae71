//! The `lamp` command-line tool.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{parse_names, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "lamp", version, about = "Multiscale local-aggregate spatial regression")]
pub struct Cli {
    /// `key = value` configuration file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for holdout splits, center placement, draws and simulation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// gaussian or exponential.
    #[arg(long, global = true)]
    pub kernel: Option<String>,
    /// Coordinate columns, comma separated.
    #[arg(long, global = true, value_name = "COLS")]
    pub coords: Option<String>,
    /// Response column (default: y).
    #[arg(long, global = true, value_name = "COL")]
    pub target: Option<String>,
    /// Covariate columns, comma separated (default: all other columns).
    #[arg(long, global = true, value_name = "COLS")]
    pub covariates: Option<String>,
    /// Fit a residual forest on top of the linear model.
    #[arg(long, global = true)]
    pub nonlinear: bool,
    /// Extra configuration setting, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and print its summary.
    Fit {
        /// Training CSV; rows with a non-zero `is_test` column are left out.
        #[arg(long)]
        data: PathBuf,
        /// Model file to write.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also write the summary to this file.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Predict at new sites.
    Predict {
        /// Model file written by `fit`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// CSV with the coordinate and covariate columns the model was fitted on.
        #[arg(long)]
        data: PathBuf,
        /// Prediction CSV to write.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Predictive draws; 0 writes point predictions only.
        #[arg(long)]
        draws: Option<usize>,
        /// Central interval probability.
        #[arg(long)]
        level: Option<f64>,
        /// Only rows flagged as test rows.
        #[arg(long)]
        test_only: bool,
    },
    /// Generate a synthetic dataset and its truth decomposition.
    Simulate {
        /// linear or nonlinear.
        #[arg(long, default_value = "linear")]
        kind: String,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = lamp_core::synth::N_TEST)]
        n_test: usize,
        /// Bandwidth of the spatial process.
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        /// Data CSV to write.
        #[arg(long)]
        output: PathBuf,
        /// Truth file (default: next to the output, with a `.truth.csv` suffix).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run the synthetic benchmark.
    Benchmark {
        #[arg(long, default_value = "linear")]
        kind: String,
        /// Training sizes, comma separated.
        #[arg(long, default_value = "500")]
        n: String,
        /// Process bandwidths, comma separated.
        #[arg(long, default_value = "1.0")]
        h: String,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        #[arg(long, default_value = "OLS,LAMP,LAMP-RF,RF")]
        models: String,
        #[arg(long, default_value_t = lamp_core::synth::N_TEST)]
        n_test: usize,
        /// Predictive draws per model for CRPS and coverage.
        #[arg(long, default_value_t = 200)]
        draws: usize,
        /// Per-trial report; also the journal for `--resume`.
        #[arg(long)]
        report: PathBuf,
        /// Medians summary (default: next to the report, with a `.summary.csv` suffix).
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Skip trials already present in the report.
        #[arg(long)]
        resume: bool,
    },
    /// Accumulated local effects curve of one feature.
    Ale {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Data whose training rows set the feature distribution.
        #[arg(long)]
        data: PathBuf,
        /// Covariate, learner feature or (with `--include-coords`) coordinate.
        #[arg(long)]
        feature: String,
        /// Quantile bins (default 40).
        #[arg(long)]
        bins: Option<usize>,
        /// Curve CSV to write.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Allow a coordinate column as the feature.
        #[arg(long)]
        include_coords: bool,
    },
}

impl Cli {
    /// Defaults, then the config file, then `--set` values, then dedicated flags.
    pub fn run_config(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        if let Some(k) = &self.kernel {
            cfg.set("kernel", k)?;
        }
        if let Some(c) = &self.coords {
            cfg.coords = parse_names(c);
        }
        if let Some(t) = &self.target {
            cfg.target = t.clone();
        }
        if let Some(c) = &self.covariates {
            cfg.covariates = parse_names(c);
        }
        if self.nonlinear {
            cfg.nonlinear = true;
        }
        match &self.command {
            Command::Predict { draws, level, .. } => {
                if let Some(d) = draws {
                    cfg.draws = *d;
                }
                if let Some(l) = level {
                    cfg.level = *l;
                }
            }
            Command::Ale { bins: Some(b), .. } => cfg.bins = *b,
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = cli.run_config()?;
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        // Fails only if a pool already exists, as in repeated in-process runs.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    commands::dispatch(&cli.command, &cfg)
}

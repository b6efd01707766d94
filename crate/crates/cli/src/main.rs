//! `qtopo`: simulate quantum networks, infer their topology from
//! measurement statistics, sweep noise and compare correlation matrices.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qtopo_core::{InferError, InferenceMethod, OptError, QuantError, SimError, TopologyError};
use thiserror::Error;

use crate::commands::{GammaGrid, SweepArgs, SweepChannel};
use crate::config::{load_config, Overrides, Shots};
use crate::output::OutDir;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("physics error: {0}")]
    Physics(String),
    #[error("{0}")]
    Inconsistent(InferError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Physics(_) => 3,
            CliError::Inconsistent(_) => 4,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Physics(e.to_string())
    }
}

impl From<QuantError> for CliError {
    fn from(e: QuantError) -> Self {
        CliError::Physics(e.to_string())
    }
}

impl From<OptError> for CliError {
    fn from(e: OptError) -> Self {
        match e {
            OptError::InvalidConfig(msg) => CliError::Config(msg),
            other => CliError::Physics(other.to_string()),
        }
    }
}

impl From<TopologyError> for CliError {
    fn from(e: TopologyError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<InferError> for CliError {
    fn from(e: InferError) -> Self {
        match e {
            InferError::InconsistentCorrelationStructure { .. } => CliError::Inconsistent(e),
            InferError::Topology(t) => t.into(),
            InferError::Opt(o) => o.into(),
            other => CliError::Physics(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "qtopo", version, about = "Topology inference for quantum networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON, `schema: 1`)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
    /// Binarization threshold
    #[arg(long)]
    threshold: Option<f64>,
    /// covariance, char-per-pair or char-shared
    #[arg(long)]
    method: Option<InferenceMethod>,
}

#[derive(Args)]
struct CommonArgs {
    /// Top-level seed; overrides `optimizer.seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Shot count or `analytic`
    #[arg(long)]
    shots: Option<Shots>,
}

#[derive(Subcommand)]
enum Command {
    /// Measure the configured network in a fixed basis
    Simulate(RunArgs),
    /// Optimize bases, build the correlation matrix and decode a topology
    Infer(RunArgs),
    /// Optimized Bell-pair MI and covariance across noise strengths
    SweepNoise {
        /// Optional config supplying `optimizer` and `shots`
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "depolarizing")]
        channel: SweepChannel,
        /// Inclusive grid `start:stop:step`
        #[arg(long, default_value = "0:0.9:0.1")]
        gamma_grid: GammaGrid,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Exit 0 when two matrices agree up to a node relabeling, 1 otherwise
    Compare {
        /// Matrix as CSV or JSON, or a topology document
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

fn overrides(run: &RunArgs) -> Overrides {
    Overrides {
        seed: run.common.seed,
        shots: run.common.shots,
        threshold: run.threshold,
        method: run.method,
    }
}

fn run(cli: Cli) -> Result<(u8, String), CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let config = load_config(&args.config)?;
            let out = OutDir::create(&args.out)?;
            Ok((0, commands::simulate(&config, &overrides(&args), &out)?))
        }
        Command::Infer(args) => {
            let config = load_config(&args.config)?;
            let out = OutDir::create(&args.out)?;
            Ok((0, commands::infer(&config, &overrides(&args), &out)?))
        }
        Command::SweepNoise {
            config,
            out,
            channel,
            gamma_grid,
            trials,
            common,
        } => {
            let config = config.as_deref().map(load_config).transpose()?;
            let out = OutDir::create(&out)?;
            let overrides = Overrides {
                seed: common.seed,
                shots: common.shots,
                ..Default::default()
            };
            let args = SweepArgs {
                channel,
                grid: gamma_grid.0,
                trials,
            };
            Ok((0, commands::sweep_noise(config.as_ref(), &overrides, &args, &out)?))
        }
        Command::Compare { a, b, tol } => {
            let (same, message) = commands::compare(&a, &b, tol)?;
            Ok((if same { 0 } else { 1 }, message))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok((code, message)) => {
            println!("{message}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("qtopo: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

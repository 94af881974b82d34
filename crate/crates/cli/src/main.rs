//! `advrisk`: experiment runner. Each subcommand reads an optional TOML
//! config, applies flag overrides, and writes CSV curves (plus SVG
//! renderings) into the output directory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical degeneracy,
//! 4 I/O or fetch failure.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigFile, Experiment, Settings, OUTPUT_DIR_ENV, THREADS_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<advrisk::Error> for CliError {
    fn from(e: advrisk::Error) -> Self {
        use advrisk::Error as E;
        match e {
            E::Degenerate(_) | E::Convergence(_) | E::Calibration(_) => CliError::Degenerate(e.to_string()),
            E::Io(_) | E::Network(_) | E::Parse { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "advrisk", version, about = "Adversarial-risk experiments for kernel and wide-network regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML file with experiment keys; flags override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: ConfigFile,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gram-matrix diagnostics: smallest eigenvalue and design separation.
    KernelCheck(Common),
    /// Adversarial risk along gradient-flow time, per radius.
    FlowSweep(Common),
    /// G_A^2 of the interpolant against log(n r_n).
    InterpolantDivergence(Common),
    /// L2 risk at the early-stopping time across sample sizes.
    RateSweep(Common),
    /// Lepski-selected ridge regression.
    Lepski(Common),
    /// Projected and truncated kernel ridge regression.
    PtKrr(Common),
    /// Trimmed randomized smoothing of the interpolant.
    Smooth(Common),
    /// Oscillation of the calibrated lower-bound construction.
    Lowerbound(Common),
    /// Separation, exponential-moment, Gaussian-range and flow-gap checks.
    TheorySuite(Common),
    /// Finite-width network training against the kernel flow.
    Widenet(Common),
}

impl Command {
    fn split(self) -> (Experiment, Common) {
        match self {
            Command::KernelCheck(c) => (Experiment::KernelCheck, c),
            Command::FlowSweep(c) => (Experiment::FlowSweep, c),
            Command::InterpolantDivergence(c) => (Experiment::InterpolantDivergence, c),
            Command::RateSweep(c) => (Experiment::RateSweep, c),
            Command::Lepski(c) => (Experiment::Lepski, c),
            Command::PtKrr(c) => (Experiment::PtKrr, c),
            Command::Smooth(c) => (Experiment::Smooth, c),
            Command::Lowerbound(c) => (Experiment::Lowerbound, c),
            Command::TheorySuite(c) => (Experiment::TheorySuite, c),
            Command::Widenet(c) => (Experiment::Widenet, c),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (experiment, common) = cli.command.split();
    let file = common.config.as_deref().map(ConfigFile::load).transpose()?;
    let env_dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
    let settings = Settings::resolve(experiment, file, &common.flags, env_dir)?;
    let out = run::run(experiment, &settings)?;
    for line in &out.summary {
        println!("{line}");
    }
    let written = output::write_curves(&settings.output_dir, &out.curves, &settings, out.error.is_none())?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    match out.error {
        Some(e) => Err(match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", experiment.name())),
            CliError::Degenerate(m) => CliError::Degenerate(format!("{}: {m}", experiment.name())),
            CliError::Io(m) => CliError::Io(format!("{}: {m}", experiment.name())),
        }),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("advrisk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

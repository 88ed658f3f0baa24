//! Batch frontend for the two-mode-squeezed readout toolkit.
//!
//! Six subcommands cover the figure-level reproductions: `analytic`
//! (closed-form metrics at one working point), `simulate` (labeled IQ shot
//! sets), `phi-sweep` (combined-mode fidelity and photon number versus the
//! relative rotation), `landscape` (the gain × noise metric grid),
//! `calibrate` (chain gain/noise extraction from noise-power data), and
//! `backaction` (isolation estimate from coherence-versus-gain data).
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub mod commands;
pub mod config;

pub const TOOL: &str = concat!("tmsq ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(
    name = "tmsq",
    version,
    about = "Two-mode-squeezed readout simulator and metrics toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML configuration file (strict schema, unit-suffixed keys)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Named parameter set to start from (see TMSQ_FIXTURE_DIR)
    #[arg(long, global = true, value_name = "NAME")]
    pub fixture: Option<String>,

    /// RNG seed (overrides the config file)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output path; stdout when omitted
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Output format
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Worker threads for sweep evaluation (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Closed-form SNR and fidelity metrics at one working point
    Analytic,
    /// Sample a labeled IQ shot set
    Simulate,
    /// Sweep the relative rotation of the combined mode over a shot set
    PhiSweep,
    /// Evaluate the metric grid over gain (dB) × added noise
    Landscape,
    /// Fit chain gain and added noise from noise-power-vs-gain data
    Calibrate,
    /// Estimate amplifier-to-qubit isolation from coherence-vs-gain data
    Backaction,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analytic => "analytic",
            Command::Simulate => "simulate",
            Command::PhiSweep => "phi-sweep",
            Command::Landscape => "landscape",
            Command::Calibrate => "calibrate",
            Command::Backaction => "backaction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// CLI-level errors, carrying their exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, unknown keys/fixtures, unreadable files: exit 2.
    Config(String),
    /// A numerical routine failed: exit 3.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Wrap a core error, qualifying it with the failing module/command.
    pub fn from_core(module: &str, e: tmsq_core::Error) -> Self {
        match e {
            tmsq_core::Error::Parse(msg) => CliError::Config(format!("{module}: {msg}")),
            tmsq_core::Error::Io(e) => CliError::Config(format!("{module}: {e}")),
            other => CliError::Numerical(format!("{module}: {other}")),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Parse configuration, dispatch the subcommand, write the artifact.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => config::FileConfig::load(path)?,
        None => config::FileConfig::default(),
    };
    let resolved = config::resolve(
        cli.command.name(),
        &file,
        cli.fixture.as_deref(),
        cli.seed,
        cli.format,
    )?;
    let out_path = cli.out.clone().or(file.out);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
    let artifact = pool.install(|| commands::dispatch(cli.command, &resolved))?;

    match out_path {
        Some(path) => std::fs::write(&path, artifact)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(artifact.as_bytes())
                .map_err(|e| CliError::Config(format!("cannot write stdout: {e}")))
        }
    }
}

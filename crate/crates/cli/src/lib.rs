//! `accessbound` command-line front end.
//!
//! Every subcommand reads an optional JSON config (`--config`), lets flags
//! override it, runs one pipeline and writes CSV, JSON and SVG files tagged
//! with a hash of the resolved configuration and the seed.

mod commands;
mod config;
mod output;
mod svg;

use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

pub use config::{Emit, RunConfig};
pub use output::{config_hash, Output, OUT_DIR_ENV};

/// Exit code for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit code for bad flags, configs or inputs.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit code for failures that are not the caller's fault.
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<accessbound_core::Error> for CliError {
    fn from(e: accessbound_core::Error) -> Self {
        // every library error stems from the parameters it was given
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Validation(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "accessbound", version, about = "Accessibility bounds for prompt-controlled generation, and toy-scale experiments")]
pub struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice; required by stochastic subcommands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: $ACCESSBOUND_OUT, else ./accessbound-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output formats, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub emit: Option<Vec<Emit>>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Counting bounds, thresholds and slopes for a model geometry.
    Bounds(commands::bounds::BoundsArgs),
    /// Embedding-support estimates of a toy model or external embeddings.
    Support(commands::support::SupportArgs),
    /// Decoder-cell volumes and the median inaccessibility threshold.
    Cellvol(commands::cellvol::CellvolArgs),
    /// Soft-prompt cramming grid, sigmoid fits and slope comparison.
    Cram(commands::cram::CramArgs),
    /// Copy fine-tuning and length generalization.
    Copy(commands::copy::CopyArgs),
    /// Next-token regions on a plane through three embeddings.
    Planecut(commands::planecut::PlanecutArgs),
    /// Exhaustive check of the elementary-operation density lemma.
    Eo(commands::eo::EoArgs),
    /// Merge earlier outputs into a theory-versus-practice table.
    Report(commands::report::ReportArgs),
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
/// Diagnostics go to stderr, summaries to stdout.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(summary) => {
            print!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command and returns its stdout summary.
pub fn execute(cli: Cli) -> CliResult<String> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(file.seed);
    let out_dir = cli.out.clone().or_else(|| file.out.clone()).unwrap_or_else(output::default_out_dir);
    let emit = cli.emit.clone().or_else(|| file.emit.clone()).unwrap_or_else(|| Emit::ALL.to_vec());
    let jobs = cli.jobs.or(file.jobs);
    if jobs == Some(0) {
        return invalid("jobs must be >= 1");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Internal(format!("cannot start worker pool: {e}")))?;
    let ctx = commands::Context { seed, out_dir, emit };
    pool.install(|| match cli.command {
        Command::Bounds(a) => commands::bounds::run(&ctx, a.overlay(file.bounds)),
        Command::Support(a) => commands::support::run(&ctx, a.overlay(file.support)),
        Command::Cellvol(a) => commands::cellvol::run(&ctx, a.overlay(file.cellvol)),
        Command::Cram(a) => commands::cram::run(&ctx, a.overlay(file.cram)),
        Command::Copy(a) => commands::copy::run(&ctx, a.overlay(file.copy)),
        Command::Planecut(a) => commands::planecut::run(&ctx, a.overlay(file.planecut)),
        Command::Eo(a) => commands::eo::run(&ctx, a.overlay(file.eo)),
        Command::Report(a) => commands::report::run(&ctx, a.overlay(file.report)),
    })
}

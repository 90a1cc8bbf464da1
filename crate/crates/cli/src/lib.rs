//! Command-line driver: kernel tables, route comparisons, cancellation scans,
//! Laguerre kernels and potential matrix elements, written as CSV or JSON.

pub mod commands;
pub mod grid;
pub mod output;
pub mod potential;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use output::{Format, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Converged = 0,
    Unconverged = 1,
    Usage = 2,
}

#[derive(Debug, Parser)]
#[command(name = "hyperkernel", version, about = "Extended-precision hyperradial kernels and matrix elements")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Working precision in bits.
    #[arg(long, global = true, env = "HYPERKERNEL_PRECISION", default_value_t = 256)]
    pub precision: u32,
    /// Target relative tolerance.
    #[arg(long, global = true, default_value = "1e-30")]
    pub tol: String,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for grid evaluation.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args, Clone)]
pub struct KernelGrid {
    #[arg(long)]
    pub m: String,
    #[arg(long)]
    pub p: String,
    #[arg(long)]
    pub beta: String,
    #[arg(long)]
    pub kappa: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// K^p_{m+1/2}(β, κ) through the method dispatcher.
    Kernel(KernelGrid),
    /// The Laguerre kernel by the expansion and erfc routes.
    Laguerre {
        #[arg(long, default_value = "5")]
        k: String,
        #[arg(long)]
        n1: String,
        #[arg(long)]
        n2: String,
        #[arg(long)]
        gamma: String,
    },
    /// Matrix elements of a Gaussian potential model.
    Matel {
        #[arg(long)]
        potential: PathBuf,
        #[arg(long, default_value = "0")]
        l1: String,
        #[arg(long, default_value = "0")]
        l2: String,
        #[arg(long, default_value = "0")]
        mu1: String,
        #[arg(long, default_value = "0")]
        mu2: String,
        #[arg(long, default_value = "0")]
        n1: String,
        #[arg(long, default_value = "0")]
        n2: String,
        #[arg(long, default_value_t = 5)]
        k: u32,
        /// Add per-channel I2/I3 columns.
        #[arg(long)]
        breakdown: bool,
    },
    /// Series, closed form and quadrature side by side.
    Compare {
        #[command(flatten)]
        grid: KernelGrid,
        /// Leave out the per-route timing columns so output is reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Closed-form cancellation against m.
    CancelScan {
        #[arg(long, default_value = "0:6:1")]
        m: String,
        #[arg(long, default_value = "5")]
        p: String,
        #[arg(long, default_value = "1")]
        beta: String,
        #[arg(long, default_value = "0.5")]
        kappa: String,
    },
}

/// Runs a parsed command line and returns the table with its exit status.
pub fn run(cli: &Cli) -> Result<(Table, Status), CliError> {
    let ctx = commands::context(&cli.common)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    pool.install(|| commands::dispatch(&cli.command, &ctx, cli.common.jobs.max(1)))
}

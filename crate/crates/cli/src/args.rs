use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "memfair", version, about = "Fairness gaps of classifiers that memorize part of the population")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the machine-readable JSON report to this path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Rescale probability vectors and confusion rows to sum to one before
    /// validating.
    #[arg(long, global = true)]
    pub normalize: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form statistical parity, equal opportunity and equalized odds gaps.
    Gaps {
        file: PathBuf,
        /// Recompute every gap by enumerating the joint distribution.
        #[arg(long)]
        verify: bool,
    },
    /// Find a memorized composition with zero gap.
    Solve {
        #[arg(value_enum)]
        metric: SolveMetric,
        file: PathBuf,
        /// Memorized mass (required for sp and eqopp).
        #[arg(long = "pd")]
        p_d: Option<f64>,
        #[arg(long, value_enum, default_value_t = Mode::Paper)]
        mode: Mode,
    },
    /// Closed-form thresholds on the memorized mass.
    Bounds {
        #[arg(value_enum)]
        metric: BoundsMetric,
        file: PathBuf,
        /// Also report the verdict at this mass.
        #[arg(long = "pd")]
        p_d: Option<f64>,
    },
    /// Sample the model and check the closed-form gaps against the estimates.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Accepted deviation in standard errors.
        #[arg(long, default_value_t = 5.0)]
        z: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolveMetric {
    Sp,
    Eqopp,
    Eqodds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoundsMetric {
    Sp,
    Eqopp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Only the zero-gap characterization.
    Paper,
    /// Also require the memorized set to fit inside the population.
    Consistent,
}

impl Command {
    pub fn file(&self) -> &PathBuf {
        match self {
            Command::Gaps { file, .. }
            | Command::Solve { file, .. }
            | Command::Bounds { file, .. }
            | Command::Simulate { file, .. } => file,
        }
    }
}

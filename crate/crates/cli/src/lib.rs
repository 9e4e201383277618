//! Command-line front end for `memfair-core`: scenario files in, gap reports,
//! zero-bias solutions, bounds and Monte Carlo checks out.
//!
//! Exit codes: 0 success, 1 infeasible or failed check, 2 unreadable or
//! invalid input, 3 degenerate input.

pub mod args;
pub mod commands;
pub mod report;
pub mod scenario_file;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {0}")]
    Io(String),
    #[error("malformed scenario file: {0}")]
    Parse(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] memfair_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_degenerate() => EXIT_DEGENERATE,
            _ => EXIT_INVALID,
        }
    }
}

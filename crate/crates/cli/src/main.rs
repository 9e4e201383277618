use std::fs;
use std::process::ExitCode;

use clap::Parser;
use memfair::args::Cli;
use memfair::{commands, EXIT_INVALID};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = commands::run(&cli);
    if outcome.exit_code() == EXIT_INVALID || outcome.report.results.is_none() {
        eprint!("{}", outcome.human);
    } else {
        print!("{}", outcome.human);
        for d in &outcome.report.diagnostics {
            eprintln!("warning: {d}");
        }
    }
    if let Some(path) = &cli.out {
        if let Err(e) = fs::write(path, outcome.report.to_json()) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_INVALID as u8);
        }
    }
    ExitCode::from(outcome.exit_code() as u8)
}

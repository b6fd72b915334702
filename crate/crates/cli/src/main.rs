//! `otswitch` command-line tool.
//!
//! Exit status: 0 on success, 1 for a malformed invocation, 2 when the data
//! or a solver fails.

mod args;
mod commands;
mod context;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::context::UsageError;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command, &argv[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

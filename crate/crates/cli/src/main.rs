// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod cli;
mod commands;
mod record;

use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Mht(args) => commands::mht(args),
        Command::Msd(args) => commands::msd(args),
        Command::Optimize(args) => commands::optimize(args),
        Command::Reference(args) => commands::reference(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("hitwalk: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

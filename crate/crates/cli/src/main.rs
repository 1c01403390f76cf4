//! `pocsize`: bounds, confidence intervals and sample-size planning for
//! probabilities of causation.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Exit status for malformed input or invalid arguments.
const EXIT_VALIDATION: u8 = 2;
/// Exit status for numerical failures (ties, degenerate denominators, ...).
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let numerical = err
                .chain()
                .filter_map(|e| e.downcast_ref::<pocsize_core::Error>())
                .any(pocsize_core::Error::is_numerical);
            ExitCode::from(if numerical { EXIT_NUMERICAL } else { EXIT_VALIDATION })
        }
    }
}

//! Command-line front end for the rally forecasting pipeline: synthetic
//! data, feature association, training, cross validation, grid search,
//! candidate generation and challenge-metric evaluation.

pub mod args;
pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;

use anyhow::Result;

use args::{Cli, Command};

/// Runs one parsed invocation to completion.
pub fn execute(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::Corr(args) => commands::corr(args),
        Command::Train(args) => commands::train_cmd(args),
        Command::Cv(args) => commands::cv_cmd(args),
        Command::Select(args) => commands::select_cmd(args),
        Command::Predict(args) => commands::predict_cmd(args),
        Command::Evaluate(args) => commands::evaluate_cmd(args),
    }
}

/// Parses and runs, for in-process use by tests. Argument zero is the
/// program name, as in `std::env::args`.
pub fn run<I, T>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    use clap::Parser;
    let cli = Cli::try_parse_from(argv)?;
    execute(cli)
}

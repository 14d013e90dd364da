//! `qbheat`: synthetic fields, masked prediction, model fitting and
//! spectrum diagnostics from the command line.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod cmd;
mod error;
mod files;
mod parallel;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qbheat", version, about = "QB-Heat field experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize fields from a JSON spec file.
    Gen(cmd::gen::Args),
    /// Fit model pairs over a directory of fields.
    Fit(cmd::fit::Args),
    /// Predict the masked region of fields with a model set.
    Predict(cmd::predict::Args),
    /// Eigenvalue spectra, energy ratios and alignment of fitted models.
    Spectrum(cmd::spectrum::Args),
    /// Spatial correlation score per field.
    Corr(cmd::corr::Args),
    /// Evolve a scalar heat field and write frames.
    HeatSim(cmd::heat_sim::Args),
    /// Turn PGM/PPM images into fields with a seeded random convolution.
    Extract(cmd::extract::Args),
    /// Collect fit outputs into an energy-ratio CSV.
    Report(cmd::report::Args),
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen(a) => cmd::gen::run(a),
        Command::Fit(a) => cmd::fit::run(a),
        Command::Predict(a) => cmd::predict::run(a),
        Command::Spectrum(a) => cmd::spectrum::run(a),
        Command::Corr(a) => cmd::corr::run(a),
        Command::HeatSim(a) => cmd::heat_sim::run(a),
        Command::Extract(a) => cmd::extract::run(a),
        Command::Report(a) => cmd::report::run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

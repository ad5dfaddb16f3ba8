mod config;
mod record;
mod runner;

use std::process::ExitCode;

use clap::Parser;

use config::{BenchConfig, Cli};
use runner::RunnerError;

fn main() -> ExitCode {
    let cli = Cli::parse(); // clap reports usage errors with exit code 2
    let cfg = match BenchConfig::from_cli(cli) {
        Ok(cfg) => cfg,
        Err(message) => {
            eprintln!("usage error: {message}");
            return ExitCode::from(2);
        }
    };
    match runner::run(&cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(RunnerError::Io(e)) => {
            eprintln!("I/O error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

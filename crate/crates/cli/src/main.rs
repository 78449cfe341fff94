mod commands;
mod config;
mod output;
mod svg;

use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match config::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            // usage errors are configuration errors; --help and --version are not
            return ExitCode::from(if err.use_stderr() { 1 } else { 0 });
        }
    };
    match config::RunConfig::resolve(&cli).and_then(|run| commands::run(&run)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("halledge: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

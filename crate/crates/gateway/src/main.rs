use std::process::ExitCode;

use clap::Parser;
use sipsense::cli::{dispatch, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sipsense: {e}");
            e.exit_code()
        }
    }
}

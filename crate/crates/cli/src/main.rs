use std::process::ExitCode;

use clap::Parser;
use knnclutter_cli::{configure_threads, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("KNNCLUTTER_THREADS").ok();
    let result = configure_threads(threads.as_deref()).and_then(|()| run(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

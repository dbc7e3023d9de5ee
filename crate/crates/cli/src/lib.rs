//! Command-line front end for `knnclutter`: simulation, classification,
//! iteration, entropy curves, metrics and the benchmark harness, reading and
//! writing CSV and JSON.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod report;

pub use args::Cli;
pub use commands::{configure_threads, run};
pub use error::{exit, CliError, CliResult};
pub use report::{IterationSummary, RunReport};

//! Command-line companion to `chainstack-core`: chain file ingestion, the
//! diagnose → cluster → PSIS → stack → resample pipeline, and JSON/CSV
//! artifacts with reproducible formatting.

mod cli;
pub mod error;
pub mod io;
pub mod jsonfmt;
pub mod pipeline;

pub use error::{CliError, CliResult};

/// Runs the CLI and returns the process exit code, printing a
/// machine-readable error record to stderr on failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match cli::run(args) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}

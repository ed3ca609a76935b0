//! Command-line layer: argument parsing, experiment dispatch and the CSV,
//! JSON and manifest files each command writes.

pub mod args;
pub mod cmd;
pub mod error;
pub mod output;

pub use error::{CliError, Result};
pub use output::{OutputDir, OutputEntry, RunManifest, MANIFEST_NAME};

/// Parses `argv` and runs the command. Usage errors from the parser come back
/// as [`CliError::Usage`] with clap's rendered message.
pub fn run_args<I, T>(argv: I) -> Result<RunManifest>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = args::Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.render().to_string()))?;
    cmd::run(cli)
}

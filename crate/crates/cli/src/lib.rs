//! Batch front end for `offbias`: evaluations, timelines, weight fitting,
//! simulations and snapshot statistics, with hashed report manifests.

pub mod args;
mod commands;
pub mod manifest;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::Cli;
pub use svg::{render_series, render_series_files, render_svg, Series};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or flag combinations.
    #[error("usage error: {0}")]
    Usage(String),
    /// Input files that are missing, malformed or inconsistent.
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl From<offbias::Error> for CliError {
    fn from(e: offbias::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit status. Results go to `stdout`, diagnostics to `stderr`.
pub fn run<I, T>(argv: I, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match commands::dispatch(cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "offbias: {e}");
            e.exit_code()
        }
    }
}

//! Command-line front end: weight-file I/O, the compress, model and search
//! pipeline, and report emission.
//!
//! Exit codes: 0 on success, 1 on a domain or validation failure, 2 on a
//! usage or I/O failure.

mod args;
mod commands;
mod files;
mod manifest;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::Path;

use clap::Parser;

pub use args::Cli;
pub use commands::compress::{LayerStatsRow, StatsDoc, TotalRow, STATS_CSV_HEADER};
pub use commands::dse::DseDoc;
pub use commands::model::{
    LayerModel, ModelDoc, ModelTotals, Ratios, Summary, BREAKDOWN_CSV_HEADER, SUMMARY_CSV_HEADER,
};
pub use commands::FormDoc;
pub use files::{sha256_hex, tensor_from_csv, tensor_to_csv, write_atomic, InputRecord};
pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::io_msg(path, &err.to_string())
    }

    pub fn io_msg(path: &Path, what: &str) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: format!("{}: {what}", path.display()),
        }
    }

    pub fn domain(err: smartex_core::Error) -> Self {
        let code = match err {
            smartex_core::Error::Io(_) => EXIT_USAGE,
            _ => EXIT_DOMAIN,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DOMAIN,
            message: message.into(),
        }
    }
}

impl From<smartex_core::Error> for CliError {
    fn from(err: smartex_core::Error) -> Self {
        CliError::domain(err)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Parses `args` (program name first) and runs the command, writing
/// progress lines to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::usage(e.to_string()))?;
    commands::dispatch(cli, out)
}

/// Entry point shared by the binary: runs, reports errors and returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match commands::dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}

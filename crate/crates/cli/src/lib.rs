//! Command-line front end: one subcommand per dataset, each writing a CSV
//! (and optionally an SVG plot of the same numbers).

pub mod args;
pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::fs;
use std::io::Write;

use thiserror::Error;

pub use args::{Cli, Command};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Tolerance(String),

    #[error("{source}{}", hint.map(|h| format!(" (hint: {h})")).unwrap_or_default())]
    Core {
        source: splitnoise_core::Error,
        hint: Option<&'static str>,
    },

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Core {
                source: splitnoise_core::Error::InvalidParameter(_),
                ..
            } => EXIT_VALIDATION,
            CliError::Io { .. } => 1,
            _ => EXIT_TOLERANCE,
        }
    }
}

impl From<splitnoise_core::Error> for CliError {
    fn from(source: splitnoise_core::Error) -> Self {
        CliError::Core { source, hint: None }
    }
}

/// What a command produced. `failure` is set when the numbers were written
/// but a tolerance check on them did not hold.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub csv: String,
    pub plot: Option<svg::Plot>,
    pub failure: Option<String>,
}

/// Runs a parsed command line: resolves settings, computes, writes the
/// outputs. Output files are written even when a tolerance check fails.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = match cli.shared.config.as_ref() {
        Some(path) => config::ConfigFile::load(path)?,
        None => config::ConfigFile::default(),
    };
    let shared = args::SharedSettings::resolve(&cli.shared, &cfg)?;
    if let Some(n) = shared.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let out = commands::dispatch(&cli.command, &cfg, &shared)?;
    match &shared.out {
        Some(path) => fs::write(path, &out.csv).map_err(|e| io_err(path, e))?,
        None => std::io::stdout()
            .write_all(out.csv.as_bytes())
            .map_err(|e| io_err("<stdout>", e))?,
    }
    if let Some(path) = &shared.svg {
        let plot = out
            .plot
            .as_ref()
            .ok_or_else(|| CliError::Validation("this command has no plot; drop --svg".into()))?;
        fs::write(path, plot.render()).map_err(|e| io_err(path, e))?;
    }
    match out.failure {
        Some(msg) => Err(CliError::Tolerance(msg)),
        None => Ok(()),
    }
}

fn io_err(path: impl AsRef<std::path::Path>, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.as_ref().display().to_string(),
        source,
    }
}

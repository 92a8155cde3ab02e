//! Front end for `heom-core`: run configuration, dispatch and output files.

pub mod config;
pub mod output;
pub mod run;

use std::path::PathBuf;

use heom_core::HeomError;
use serde::Serialize;

pub use config::{parse_config, resolve, Cli, Command, Format, RunConfig};
pub use run::dispatch;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{what} not found at {}: {advice}", path.display())]
    MissingInput { what: &'static str, path: PathBuf, advice: String },
    #[error(transparent)]
    Core(#[from] HeomError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing {}: {message}", path.display())]
    Output { path: PathBuf, message: String },
}

/// Machine-readable form of an error, written as JSON.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub status: &'static str,
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::MissingInput { .. } => "missing-input",
            CliError::Core(HeomError::ResourceLimit { .. }) => "resource-limit",
            CliError::Core(HeomError::InvalidParameter { .. }) => "invalid-parameter",
            CliError::Core(HeomError::SnapshotMismatch { .. }) => "snapshot-mismatch",
            CliError::Core(_) => "numerics",
            CliError::Io { .. } | CliError::Output { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(HeomError::InvalidParameter { .. }) => 2,
            CliError::MissingInput { .. } | CliError::Core(HeomError::SnapshotMismatch { .. }) => 3,
            CliError::Core(HeomError::ResourceLimit { .. }) => 4,
            _ => 1,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord { status: "error", kind: self.kind(), message: self.to_string(), exit_code: self.exit_code() }
    }
}

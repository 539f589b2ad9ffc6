//! Command line front end for the constrained-chain drive simulator: single
//! trajectory runs, grid scans, figure presets, analytic check tables, symbol
//! stream statistics, and basis inspection, all with seeded deterministic
//! output.

use std::fmt;
use std::io;

pub mod checks;
pub mod config;
pub mod output;
pub mod presets;
pub mod runners;

mod cli;

pub use cli::main_entry;

/// CLI failures split by exit code: bad input (1) vs failures at run time (2).
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<pxp_core::Error> for CliError {
    fn from(e: pxp_core::Error) -> Self {
        match e {
            pxp_core::Error::Precondition(_)
            | pxp_core::Error::LengthOutOfRange(_)
            | pxp_core::Error::EnumerationTooLarge { .. }
            | pxp_core::Error::ShortTrajectory { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Serde token of a unit enum variant ("u3", "pbc", "binary", ...), shared by
/// flag parsing, CSV labels, and file names.
pub fn serde_token<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => panic!("expected a string-serializable token, got {other:?}"),
    }
}

/// Inverse of [`serde_token`], for parsing flag values.
pub fn parse_serde_token<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

//! `sawlab` command-line front end: wires a device config to the forward models and
//! fits, and writes plot-ready CSV/JSON plus a run manifest.

pub mod commands;
pub mod manifest;
pub mod pipelines;

use std::fmt;

pub use commands::{run, Cli};
pub use manifest::RunManifest;

/// Process exit status for a failed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// A model evaluation or fit failed.
    Failure = 1,
    /// Bad flags, ranges or config.
    Usage = 2,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Usage,
            msg: msg.into(),
        }
    }

    pub fn failure(msg: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Failure,
            msg: msg.into(),
        }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for CliError {}

impl From<sawlab_core::Error> for CliError {
    fn from(e: sawlab_core::Error) -> Self {
        use sawlab_core::Error as E;
        let kind = match &e {
            E::Config { .. } | E::Domain(_) | E::RankDeficient(_) | E::Parse(_) | E::NonMonotone { .. } => ExitKind::Usage,
            E::LengthMismatch { .. } => ExitKind::Usage,
            _ => ExitKind::Failure,
        };
        Self { kind, msg: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::failure(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

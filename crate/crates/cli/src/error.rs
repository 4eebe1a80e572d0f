use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("invalid config: {0}")]
    Parse(String),

    #[error(transparent)]
    Core(#[from] viscobeam::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitCode {
    Success = 0,
    Config = 1,
    Assumption = 2,
    Solver = 3,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Read { .. } | CliError::Write { .. } | CliError::Parse(_) => ExitCode::Config,
            CliError::Core(e) => match e {
                viscobeam::Error::Config(_) => ExitCode::Config,
                viscobeam::Error::Assumption(_) => ExitCode::Assumption,
                viscobeam::Error::Numerical(_) | viscobeam::Error::StepFailure { .. } => ExitCode::Solver,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Read { .. } => "read",
            CliError::Write { .. } => "write",
            CliError::Parse(_) => "parse",
            CliError::Core(viscobeam::Error::Config(_)) => "config",
            CliError::Core(viscobeam::Error::Assumption(_)) => "assumption",
            CliError::Core(viscobeam::Error::Numerical(_)) => "numerical",
            CliError::Core(viscobeam::Error::StepFailure { .. }) => "step-failure",
        }
    }

    pub(crate) fn write(path: &Path, source: std::io::Error) -> Self {
        CliError::Write { path: path.to_owned(), source }
    }
}

/// Contents of `diagnostic.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub command: String,
    pub exit_code: i32,
    pub kind: String,
    pub message: String,
    /// Step index and time, for step failures.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl Diagnostic {
    pub fn new(command: &str, err: &CliError) -> Self {
        let (step, t) = match err {
            CliError::Core(viscobeam::Error::StepFailure { step, t, .. }) => (Some(*step), Some(*t)),
            _ => (None, None),
        };
        Self {
            command: command.to_owned(),
            exit_code: err.exit_code().code(),
            kind: err.kind().to_owned(),
            message: err.to_string(),
            step,
            t,
        }
    }
}

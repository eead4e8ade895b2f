use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

/// Everything that can stop a command, with its process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] smallbuf::Error),

    /// Some N of a sweep failed; their errors are in `errors.jsonl`.
    #[error("{failed} point(s) of the sweep failed; see errors.jsonl")]
    Incomplete { failed: usize, exit_code: i32 },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 0 ok, 1 output failure, 2 configuration or usage, 3 unsupported
    /// combination, 4 numerical instability (including failed diagnostics and
    /// domain errors), 5 insufficient data.
    pub fn exit_code(&self) -> i32 {
        use smallbuf::Error as E;
        match self {
            CliError::Config(_) | CliError::Read { .. } => 2,
            CliError::Write { .. } => 1,
            CliError::Incomplete { exit_code, .. } => *exit_code,
            CliError::Core(e) => match e {
                E::Config(_) | E::Usage(_) => 2,
                E::Unsupported(_) => 3,
                E::Domain(_) | E::Instability(_) | E::Diagnostics(_) => 4,
                E::InsufficientData(_) => 5,
            },
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        use smallbuf::Error as E;
        match self {
            CliError::Config(_) => "config",
            CliError::Read { .. } => "read",
            CliError::Write { .. } => "write",
            CliError::Incomplete { .. } => "incomplete",
            CliError::Core(e) => match e {
                E::Config(_) => "config",
                E::Usage(_) => "usage",
                E::Domain(_) => "domain",
                E::Instability(_) => "instability",
                E::Unsupported(_) => "unsupported",
                E::Diagnostics(_) => "diagnostics",
                E::InsufficientData(_) => "insufficient_data",
            },
        }
    }

    pub fn write(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        CliError::Write {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }
}

/// One line of `errors.jsonl`.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub command: String,
    pub kind: String,
    pub exit_code: i32,
    /// The N at which the error occurred, for per-N failures.
    pub n: Option<u64>,
    pub message: String,
}

impl ErrorRecord {
    pub fn new(command: &str, n: Option<u64>, err: &CliError) -> Self {
        Self {
            command: command.to_string(),
            kind: err.kind().to_string(),
            exit_code: err.exit_code(),
            n,
            message: err.to_string(),
        }
    }
}

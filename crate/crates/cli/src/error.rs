use std::path::PathBuf;

use thiserror::Error;

/// Exit status for a rejected configuration or unusable input.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for a failure inside the numerical pipeline.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] regdiag_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("REGDIAG_THREADS: {0}")]
    Threads(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use regdiag_core::Error as E;
        match self {
            CliError::Core(
                E::InvalidDimension(_)
                | E::InvalidDecay(_)
                | E::NoiseDominates(_)
                | E::InvalidParameter(_)
                | E::InvalidTruncation { .. }
                | E::Io(_)
                | E::Bundle(_),
            ) => EXIT_VALIDATION,
            CliError::Core(_) => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

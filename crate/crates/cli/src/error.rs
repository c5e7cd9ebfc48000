use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] putlab::Error),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn parse(path: &Path, line: u64, message: impl Into<String>) -> Self {
        CliError::Parse { path: path.display().to_string(), line, message: message.into() }
    }

    pub fn read(path: &Path, source: std::io::Error) -> Self {
        CliError::Read { path: path.display().to_string(), source }
    }

    pub fn write(path: &Path, source: std::io::Error) -> Self {
        CliError::Write { path: path.display().to_string(), source }
    }

    /// 0 success, 1 runtime failure, 2 validation, 3 infeasible, 4 complexity guard.
    pub fn exit_code(&self) -> u8 {
        use putlab::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::Infeasible(_) | E::InfeasibleShrunkBudget(_) | E::EmptyFeasibleSet | E::NotCertifiable { .. } => 3,
                E::TooLarge(_) => 4,
                E::OptimizerNotConverged { .. } => 1,
                _ => 2,
            },
            CliError::Write { .. } => 1,
            CliError::Parse { .. } | CliError::Read { .. } | CliError::Json { .. } | CliError::Config(_) => 2,
        }
    }
}

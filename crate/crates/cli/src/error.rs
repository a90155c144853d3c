use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}:{line}: {msg}")]
    ConfigLine { path: PathBuf, line: usize, msg: String },
    #[error("run {run} diverged: {source}")]
    Divergence { run: String, source: privgraph::Error },
    #[error("{0}")]
    Format(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(privgraph::Error),
}

impl CliError {
    /// 2 for configuration and validation problems, 3 for training
    /// divergence, 4 for I/O and file-format problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigLine { .. } => 2,
            CliError::Divergence { .. } => 3,
            CliError::Format(_) | CliError::Io { .. } | CliError::Csv(_) => 4,
            CliError::Core(e) => match e {
                privgraph::Error::Divergence { .. } => 3,
                privgraph::Error::Io(_)
                | privgraph::Error::NotFound(_)
                | privgraph::Error::Parse { .. }
                | privgraph::Error::Format(_)
                | privgraph::Error::Index { .. } => 4,
                _ => 2,
            },
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<privgraph::Error> for CliError {
    fn from(e: privgraph::Error) -> Self {
        CliError::Core(e)
    }
}

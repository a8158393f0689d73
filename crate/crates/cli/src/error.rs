use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing artifact {0}; run the earlier pipeline step first")]
    MissingArtifact(PathBuf),
    #[error(transparent)]
    Core(#[from] stockcast_core::Error),
}

impl CliError {
    /// 2 for configuration problems, 4 for numerical failures, 3 for
    /// everything about the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Write { .. } => 2,
            CliError::Core(stockcast_core::Error::InvalidConfig(_)) => 2,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(_) | CliError::MissingArtifact(_) => 3,
        }
    }
}

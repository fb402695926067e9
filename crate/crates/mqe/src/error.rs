use std::path::PathBuf;

/// Errors surfaced by the command layer, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact {}: run `{}` first", .path.display(), .producer)]
    MissingArtifact { path: PathBuf, producer: &'static str },
    #[error("data error: {0}")]
    Data(String),
    #[error("io error on {}: {}", .path.display(), .source)]
    Io { path: PathBuf, source: std::io::Error },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingArtifact { .. } => 3,
            CliError::Data(_) | CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<mqe_core::Error> for CliError {
    fn from(e: mqe_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

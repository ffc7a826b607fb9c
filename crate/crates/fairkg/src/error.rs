use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FairkgError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FairkgError {
    #[error(transparent)]
    Core(#[from] fairkg_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// A line of a text input could not be parsed.
    #[error("{}:{line}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(
        "{}:{line}: candidate schema version {found} is not supported (this build reads version {supported})",
        path.display()
    )]
    SchemaVersion {
        path: PathBuf,
        line: usize,
        found: u64,
        supported: u64,
    },
    #[error("{}: rerank output not found; run `fairkg rerank` first", path.display())]
    MissingRerank { path: PathBuf },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl FairkgError {
    /// Stable machine-readable kind, used in the CLI's error output.
    pub fn kind(&self) -> &'static str {
        match self {
            FairkgError::Core(_) => "core",
            FairkgError::Io { .. } => "io",
            FairkgError::Parse { .. } => "parse",
            FairkgError::Json { .. } => "json",
            FairkgError::SchemaVersion { .. } => "schema_version",
            FairkgError::MissingRerank { .. } => "missing_rerank",
            FairkgError::Config(_) => "config",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FairkgError::Io {
            path: path.into(),
            source,
        }
    }
}

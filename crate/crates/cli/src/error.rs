use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: densim::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// RWMD ran out of time; partial outputs were kept and flagged.
    #[error("{0}")]
    Timeout(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_TIMEOUT: i32 = 3;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use densim::Error as E;
        match self {
            Self::Invalid(_) => EXIT_VALIDATION,
            Self::Io { .. } => EXIT_RUNTIME,
            Self::Timeout(_) => EXIT_TIMEOUT,
            Self::Stage { source, .. } => match source {
                E::Timeout(_) => EXIT_TIMEOUT,
                E::Io { .. } | E::Degenerate(_) => EXIT_RUNTIME,
                E::Parse { .. }
                | E::DuplicateToken { .. }
                | E::EmptyIntersection
                | E::EmptyInput(_)
                | E::DimensionMismatch { .. }
                | E::InvalidParameter(_)
                | E::Format(_) => EXIT_VALIDATION,
            },
        }
    }
}

/// Tags a library error with the stage that produced it.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> StageExt<T> for densim::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

pub fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Invalid(msg.into()))
}

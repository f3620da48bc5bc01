use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Input(String),

    /// A validation failure pinned to a 1-based data row (header excluded).
    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: bayesmooth::Error,
    },

    #[error(transparent)]
    Model(#[from] bayesmooth::Error),

    #[error(transparent)]
    Artifact(#[from] ArtifactError),

    #[error("every series failed")]
    AllSeriesFailed,
}

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("unsupported artifact version {found:?} (expected {expected:?})")]
    VersionMismatch { found: String, expected: String },

    #[error("artifact checksum mismatch (file is truncated or corrupted)")]
    ChecksumMismatch,

    #[error("malformed artifact: {0}")]
    Malformed(String),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// 0 success, 1 input or validation, 2 inference.
    pub fn exit_code(&self) -> i32 {
        use bayesmooth::Error as E;
        match self {
            Self::Model(
                E::AllRestartsInfeasible | E::ChainStuck { .. } | E::PathInfeasible { .. } | E::LevelCollapse { .. },
            ) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

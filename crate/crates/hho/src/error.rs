use std::path::PathBuf;

use hho_core::error::MeshError;

#[derive(Debug, thiserror::Error)]
pub enum HhoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("mesh file: {0}")]
    MeshJson(#[from] serde_json::Error),
    #[error("mesh file: {0}")]
    MeshFormat(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("config: {0}")]
    ConfigParse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] hho_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HhoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// 2 for configuration and input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HhoError::Numerical(hho_core::Error::InvalidArgument(_)) | HhoError::Numerical(hho_core::Error::Mesh(_)) => 2,
            HhoError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = HhoError> = std::result::Result<T, E>;

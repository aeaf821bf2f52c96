use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Core(#[from] loco_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Self::Spec(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

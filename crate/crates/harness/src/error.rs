use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("plan does not parse: {0}")]
    Parse(String),
    #[error("invalid plan: {0}")]
    Invalid(String),
    #[error("bad override {0:?}: expected key=value")]
    Override(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] burgulence::Error),
    #[error("manifest: {0}")]
    Manifest(String),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

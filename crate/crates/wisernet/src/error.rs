use std::path::PathBuf;

/// Crate-wide error type. Variants map onto the CLI exit codes:
/// `Usage`/`Config` are caller mistakes (exit 2), `Io`/`Load` are
/// environment failures (exit 3), `Numerical` is a training or
/// linear-algebra abort (exit 4).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("load error: {0}")]
    Load(String),

    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

/// Errors produced by the census library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt field file: {0}")]
    Corrupt(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("level error: {0}")]
    Level(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty vortex: reconstructed vortex field is identically zero")]
    EmptyVortex,

    #[error("simulation became unstable at step {step} (t = {time:.6}); try a smaller dt")]
    Instability { step: usize, time: f64 },

    #[error("unknown wavelet filter '{0}' (expected haar, d4 or la8)")]
    UnknownFilter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two points that must be distinct coincide (zero propagation distance).
    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    #[error("channel matrix is identically zero")]
    ZeroChannel,

    #[error("spectrum has no positive value")]
    ZeroSpectrum,

    #[error(
        "active set changes across the derivative stencil ({below} modes at -delta, {above} at +delta); shrink the step"
    )]
    ActiveSetChanged { below: usize, above: usize },

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("kernel spectrum did not converge: {0}")]
    NotConverged(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Parse(_) => ErrorKind::Config,
            Error::Io { .. } => ErrorKind::Io,
            Error::SingularGeometry(_)
            | Error::ZeroChannel
            | Error::ZeroSpectrum
            | Error::ActiveSetChanged { .. }
            | Error::Decomposition(_)
            | Error::NotConverged(_) => ErrorKind::Numerical,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

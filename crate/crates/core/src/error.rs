use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported bit depth: {0} bits per sample (only 8-bit is accepted)")]
    UnsupportedBitDepth(u8),
    #[error("unsupported PNG color type: {0}")]
    UnsupportedColorType(String),
    #[error("corrupt image stream: {0}")]
    CorruptImage(String),
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("wrong color space: expected {expected}, found {found}")]
    WrongColorSpace {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dataset directory {0} contains no usable PNG images")]
    EmptyDataset(PathBuf),
    #[error("non-finite gradient in {name} at iteration {iteration}")]
    NonFiniteGradient { iteration: u64, name: String },
    #[error("CorruptPack: {0}")]
    CorruptPack(String),
    #[error("unsupported sampling interval 2^{0} (only 2^4 is supported)")]
    UnsupportedInterval(u32),
    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("receptive field formula covers 1 or 2 stages, config has {0}")]
    RfOutOfDomain(usize),
}

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Artifact,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) | Error::UnsupportedInterval(_) | Error::RfOutOfDomain(_) => {
                ErrorKind::Config
            }
            Error::CorruptPack(_) | Error::TopologyMismatch(_) | Error::CorruptCheckpoint(_) => {
                ErrorKind::Artifact
            }
            _ => ErrorKind::Data,
        }
    }
}

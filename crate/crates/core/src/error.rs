use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported format version {0}")]
    BadVersion(u8),

    #[error("truncated payload: needed {needed} bytes, had {available}")]
    Truncated { needed: usize, available: usize },

    #[error("tensor file declares rank 0")]
    ZeroRank,

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point outside likelihood domain at index {index} (value {value})")]
    Domain { index: usize, value: f64 },

    #[error("markov chain diverged at step {step}")]
    ChainDiverged { step: u64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("{0} did not converge")]
    NoConvergence(String),

    #[error("malformed config line {line}: {text:?}")]
    MalformedConfig { line: usize, text: String },

    #[error("unknown config key {0:?}")]
    UnknownKey(String),

    #[error("missing required config key {0:?}")]
    MissingKey(String),

    #[error("config key {key:?}: cannot parse {value:?}")]
    BadValue { key: String, value: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: &[usize], actual: &[usize]) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }

    /// Stable short code used in machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::BadMagic { .. } => "bad_magic",
            Error::BadVersion(_) => "bad_version",
            Error::Truncated { .. } => "truncated",
            Error::ZeroRank => "zero_rank",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Domain { .. } => "domain",
            Error::ChainDiverged { .. } => "chain_diverged",
            Error::NonFinite { .. } => "non_finite",
            Error::NoConvergence(_) => "no_convergence",
            Error::MalformedConfig { .. } => "malformed_config",
            Error::UnknownKey(_) => "unknown_key",
            Error::MissingKey(_) => "missing_key",
            Error::BadValue { .. } => "bad_value",
        }
    }
}

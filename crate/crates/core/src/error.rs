use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the environment, mode space, agents and metrics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("QP {qp} outside the legal range [0, 51]")]
    QpOutOfRange { qp: i32 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{value} is not in the {alphabet} alphabet")]
    AlphabetViolation { alphabet: &'static str, value: i32 },

    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("malformed mode key `{0}`")]
    MalformedModeKey(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("format version {found} is not supported (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("mode space has {size} modes, above the search cap of {cap}")]
    SearchCap { size: u128, cap: u128 },

    #[error("non-finite loss: {0}")]
    NonFinite(String),

    #[error("insufficient RD points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("RD curves do not overlap on the integration axis")]
    NoOverlap,

    #[error("singular polynomial fit")]
    SingularFit,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Short stable name of the error variant, used for machine-readable reporting.
    pub fn class(&self) -> &'static str {
        match self {
            Error::QpOutOfRange { .. } => "QpOutOfRange",
            Error::Dimension(_) => "Dimension",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::AlphabetViolation { .. } => "AlphabetViolation",
            Error::UnknownMode(_) => "UnknownMode",
            Error::MalformedModeKey(_) => "MalformedModeKey",
            Error::Parse { .. } => "Parse",
            Error::FormatVersion { .. } => "FormatVersion",
            Error::SearchCap { .. } => "SearchCap",
            Error::NonFinite(_) => "NonFinite",
            Error::InsufficientPoints { .. } => "InsufficientPoints",
            Error::NoOverlap => "NoOverlap",
            Error::SingularFit => "SingularFit",
            Error::Io { .. } => "Io",
            Error::Csv(_) => "Csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

/// Errors produced by the extraction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("span {start}..={end} is out of range for a title of {len} tokens")]
    SpanOutOfRange { start: usize, end: usize, len: usize },

    #[error("position {position} is out of range for a title of {len} tokens")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("empty title")]
    EmptyTitle,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("title of {len} tokens is too long for exhaustive enumeration (limit {limit})")]
    TooLongForEnumeration { len: usize, limit: usize },

    #[error("invalid label sequence: {0}")]
    InvalidLabels(String),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("unknown feature template {0:?}")]
    UnknownTemplate(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: model has {model} weights, index has {index} features")]
    DimensionMismatch { model: usize, index: usize },

    #[error("non-finite objective value {0} during training")]
    NonFiniteObjective(f64),

    #[error("records carry more than one attribute name: {0:?} and {1:?}")]
    MixedAttributes(String, String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("corpus has {len} items, fewer than the {k} folds requested")]
    TooFewItems { len: usize, k: usize },

    #[error("unsupported model format version {found} (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}

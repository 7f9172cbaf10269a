use std::path::PathBuf;

/// Errors produced anywhere in the style retrieval stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("position {position} out of range for script of length {len}")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("endpoint {address} unavailable: {reason}")]
    EndpointUnavailable { address: String, reason: String },

    #[error("segments are not ordered by start time (index {0})")]
    UnorderedInput(usize),

    #[error("segments overlap at index {0}")]
    OverlappingSegments(usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("duplicate clip id {0}")]
    DuplicateClipId(String),

    #[error("unknown clip id {0}")]
    UnknownClipId(String),

    #[error("requested {requested} clusters but only {available} records")]
    TooManyClusters { requested: usize, available: usize },

    #[error("unsupported index format version {found} (supported up to {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("corrupt index file: {0}")]
    CorruptFile(String),

    #[error("the style database is empty")]
    EmptyDatabase,

    #[error("no prompts to bundle")]
    EmptyBundle,

    #[error("text token sequence is empty")]
    EmptyText,

    #[error("transcript is empty")]
    EmptyTranscript,

    #[error("unknown script {0}")]
    UnknownScript(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn unavailable(address: impl Into<String>, reason: impl ToString) -> Self {
        Error::EndpointUnavailable {
            address: address.into(),
            reason: reason.to_string(),
        }
    }

    /// Stable machine-readable code, used by the HTTP service and the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteInput(_) => "NonFiniteInput",
            Error::PositionOutOfRange { .. } => "PositionOutOfRange",
            Error::EndpointUnavailable { .. } => "EndpointUnavailable",
            Error::UnorderedInput(_) => "UnorderedInput",
            Error::OverlappingSegments(_) => "OverlappingSegments",
            Error::EmptyInput(_) => "EmptyInput",
            Error::DuplicateClipId(_) => "DuplicateClipId",
            Error::UnknownClipId(_) => "UnknownClipId",
            Error::TooManyClusters { .. } => "TooManyClusters",
            Error::UnsupportedVersion { .. } => "UnsupportedVersion",
            Error::CorruptFile(_) => "CorruptFile",
            Error::EmptyDatabase => "EmptyDatabase",
            Error::EmptyBundle => "EmptyBundle",
            Error::EmptyText => "EmptyText",
            Error::EmptyTranscript => "EmptyTranscript",
            Error::UnknownScript(_) => "UnknownScript",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io { .. } => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

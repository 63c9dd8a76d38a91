//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A required model tensor is absent from the bundle.
    #[error("missing tensor `{0}`")]
    MissingTensor(String),

    #[error("tensor `{name}` has shape {actual:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("tensor `{name}` has non-finite entry at flat offset {offset}")]
    NonFiniteTensor { name: String, offset: usize },

    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("non-finite intermediate value in layer {layer} ({stage})")]
    NumericOverflow { layer: usize, stage: &'static str },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("probe {probe} is not valid for this model: {reason}")]
    InvalidProbe { probe: String, reason: String },

    #[error("{path}: line {line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("item `{item_id}`: label {label} out of range for {n_candidates} candidates")]
    LabelOutOfRange {
        item_id: String,
        label: usize,
        n_candidates: usize,
    },

    #[error("prompt for item `{item_id}` candidate {candidate} has {len} tokens, exceeding max_seq_len {max}")]
    SequenceTooLong {
        item_id: String,
        candidate: usize,
        len: usize,
        max: usize,
    },

    #[error("item `{item_id}` candidate {candidate}: {source}")]
    Capture {
        item_id: String,
        candidate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported record format version {0}")]
    UnsupportedVersion(u32),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("invalid records: {0}")]
    InvalidRecords(String),

    #[error("item `{0}` has no label")]
    Unlabeled(String),

    #[error("selection error: {0}")]
    Selection(String),

    #[error("probe column {0} missing from records")]
    MissingProbe(String),

    #[error("rig cannot be built: {0}")]
    Rig(String),

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Short machine-parseable category used by the CLI on stderr.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MissingTensor(_)
            | Error::ShapeMismatch { .. }
            | Error::NonFiniteTensor { .. }
            | Error::InvalidConfig(_) => "model",
            Error::NumericOverflow { .. } => "numeric",
            Error::InvalidInput(_) | Error::InvalidProbe { .. } => "input",
            Error::MalformedLine { .. }
            | Error::InvalidDataset(_)
            | Error::LabelOutOfRange { .. }
            | Error::SequenceTooLong { .. } => "data",
            Error::Capture { source, .. } => source.category(),
            Error::UnsupportedVersion(_) | Error::Integrity(_) | Error::InvalidRecords(_) => {
                "format"
            }
            Error::Json { .. } => "format",
            Error::Unlabeled(_) | Error::Selection(_) | Error::MissingProbe(_) => "selection",
            Error::Rig(_) => "rig",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}

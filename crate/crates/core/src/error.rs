use std::path::PathBuf;

/// Errors produced by the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("validation error: {0}")]
    Validation(String),

    /// A zero-norm vector was handed to a cosine measure. `index` is the frame
    /// (utterance-level) or utterance (speaker-level) position.
    #[error("degenerate zero-norm vector at index {index}")]
    DegenerateVector { index: usize },

    #[error("too few frames: need at least {required}, got {actual}")]
    TooFewFrames { required: usize, actual: usize },

    #[error("too few utterances: need at least {required}, got {actual}")]
    TooFewUtterances { required: usize, actual: usize },

    #[error("insufficient data: {requested} items requested but only {available} available")]
    InsufficientData { requested: usize, available: usize },

    #[error("insufficient pairs: speaker {speaker_id} has {utterances} utterance(s), need at least 2")]
    InsufficientPairs { speaker_id: String, utterances: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Validation(_) => "validation",
            Error::DegenerateVector { .. } => "degenerate_vector",
            Error::TooFewFrames { .. } => "too_few_frames",
            Error::TooFewUtterances { .. } => "too_few_utterances",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::InsufficientPairs { .. } => "insufficient_pairs",
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Evaluation(_) => "evaluation",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate post id {id:?} at line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("empty frequency table")]
    EmptyFrequencyTable,

    #[error("invalid hashtag {0:?}")]
    InvalidHashtag(String),

    #[error("segmentation override {segmented:?} does not spell {surface:?}")]
    BadOverride { surface: String, segmented: String },

    #[error("degenerate embedding")]
    DegenerateEmbedding,

    #[error("non-finite logits")]
    NonFiniteLogits,

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty lexicon")]
    EmptyLexicon,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty vocabulary")]
    EmptyVocabulary,

    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),

    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::DuplicateId { .. } => "duplicate_id",
            Error::EmptyFrequencyTable => "empty_frequency_table",
            Error::InvalidHashtag(_) => "invalid_hashtag",
            Error::BadOverride { .. } => "bad_override",
            Error::DegenerateEmbedding => "degenerate_embedding",
            Error::NonFiniteLogits => "non_finite_logits",
            Error::EmptyBatch => "empty_batch",
            Error::EmptyLexicon => "empty_lexicon",
            Error::LengthMismatch(..) => "length_mismatch",
            Error::EmptyVocabulary => "empty_vocabulary",
            Error::Diverged { .. } => "diverged",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Checkpoint(_) => "checkpoint",
            Error::Incompatible(_) => "incompatible",
            Error::Config { .. } => "config",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the extraction and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("missing trial file: {0}")]
    MissingTrialFile(PathBuf),

    #[error("duplicate subject id: {0}")]
    DuplicateSubject(String),

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("rating {rating} outside scale [{min}, {max}]")]
    RatingOutOfScale { rating: f64, min: f64, max: f64 },

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("empty signal")]
    EmptySignal,

    #[error("constant signal")]
    ConstantSignal,

    #[error("signal too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("band [{low}, {high}] Hz invalid for fs = {fs} Hz")]
    InvalidBand { low: f64, high: f64, fs: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown channel {0:?} for scalp layout")]
    UnknownChannel(String),

    #[error("wrong image shape: expected {expected}, got {got}")]
    ImageShape { expected: String, got: String },

    #[error("embedding provider failed for {context}: {message}")]
    Provider { context: String, message: String },

    #[error("dim mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("sidecar timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error("malformed response: {0}")]
    MalformedResponse(String),

    #[error("trial id mismatch: {0} vs {1}")]
    TrialMismatch(String, String),

    #[error("feature-set mismatch in block {block}: {detail}")]
    FeatureSetMismatch { block: String, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("non-finite loss at epoch {0}")]
    NonFiniteLoss(usize),

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Wraps this error with a context string (trial id, frame index, ...).
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

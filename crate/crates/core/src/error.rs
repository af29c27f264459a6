use thiserror::Error;

/// Errors raised anywhere in the assessment pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("schema error at line {line}: {reason}")]
    Schema { line: usize, reason: String },

    #[error("unknown subject '{0}'")]
    UnknownSubject(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry at frame {frame}: {reason}")]
    DegenerateGeometry { frame: usize, reason: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("timestamps are not strictly increasing at index {0}")]
    NonMonotoneTime(usize),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("labels contain a single class; both classes are required")]
    DegenerateLabels,

    #[error("illegal action {0}")]
    IllegalAction(String),

    #[error("need at least {needed} normal repetitions, got {got}")]
    InsufficientNormals { needed: usize, got: usize },

    #[error("feature name order does not match the profile")]
    NameOrderMismatch,

    #[error("no feedback template for feature family '{0}'")]
    MissingTemplate(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("fold for subject '{subject}': {source}")]
    Fold {
        subject: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

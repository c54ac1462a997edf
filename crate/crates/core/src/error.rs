use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("annotation counts are empty (total == 0)")]
    EmptyCounts,

    #[error("distribution is not on the probability simplex: {0}")]
    InvalidDistribution(String),

    #[error("class count mismatch: expected {expected}, found {found}")]
    ClassMismatch { expected: usize, found: usize },

    #[error("predicted distribution has zero mass on class {class} where the reference is positive")]
    SupportMismatch { class: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("requested {requested} annotators but only {available} are available")]
    InsufficientAnnotators { requested: u64, available: u64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate record for item {item_id:?}, rater {rater_id:?}")]
    DuplicateRecord { item_id: String, rater_id: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("evaluation set is empty")]
    EmptyEval,

    #[error("zero variance in {0}; correlation undefined")]
    DegenerateVariance(&'static str),

    #[error("paired differences have zero variance")]
    DegenerateDifferences,

    #[error("all logits are identical; temperature is unidentifiable")]
    DegenerateLogits,

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("improvement range is zero (full == hard)")]
    ZeroRange,

    #[error("incomplete experiment: {0}")]
    IncompleteExperiment(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 incomplete experiment.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InsufficientAnnotators { .. } => 2,
            Error::IncompleteExperiment(_) => 4,
            _ => 3,
        }
    }
}

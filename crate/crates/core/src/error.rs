use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the pipeline.
///
/// Variants are grouped so the CLI can map them onto exit codes:
/// configuration problems, data problems, and internal failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("unknown or invalid config key `{key}`: {message}")]
    ConfigKey { key: String, message: String },

    #[error("path does not exist: {}", .0.display())]
    MissingPath(PathBuf),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("unreadable event stream: {0}")]
    Unreadable(String),

    #[error("degenerate cohort: {positives} positive and {negatives} negative members")]
    DegenerateCohort { positives: usize, negatives: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("labels contain a single class")]
    SingleClass,

    #[error("matrix has no feature columns")]
    NoColumns,

    #[error("schema mismatch at column {index}: model expects `{expected}`")]
    SchemaMismatch { index: usize, expected: String },

    #[error("importances undefined for this kind: {0}")]
    ImportancesUndefined(String),

    #[error("approach {0} requires elimination stage")]
    RequiresElimination(String),

    #[error("class with {count} members cannot be split into {n_folds} folds")]
    TooFewForFolds { count: usize, n_folds: usize },

    #[error("untabulated critical value for alpha={alpha}, k={k}")]
    Untabulated { alpha: f64, k: usize },

    #[error("score table: {0}")]
    ScoreTable(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }

    /// Process exit code for this error: 1 usage/config, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ConfigKey { .. } | Error::MissingPath(_) => 1,
            Error::Io(_) | Error::Json(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

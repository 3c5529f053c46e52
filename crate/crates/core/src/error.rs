use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the indexing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("document {0} contains no tokens")]
    EmptyDocument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("lexicon error at line {line}: {message}")]
    Lexicon { line: usize, message: String },

    #[error("alias table error at line {line}: {message}")]
    Alias { line: usize, message: String },

    #[error("no prime characters available for core selection")]
    CoreExtraction,

    #[error("no interacting blocks for pair ({0}, {1})")]
    NoPivots(String, String),

    #[error("a series needs at least 2 pivots, found {0}")]
    TooFewPivots(usize),

    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("both series carry zero sentiment mass")]
    DegenerateSeries,

    #[error("pair ({left}, {right}): {source}")]
    Pair {
        left: String,
        right: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid similarity matrix: {0}")]
    InvalidMatrix(String),

    #[error("unknown book: {0}")]
    UnknownBook(String),

    #[error("catalogue is empty")]
    EmptyCatalogue,

    #[error("unsupported catalogue format version {found} (expected major {expected})")]
    Version { found: String, expected: u32 },

    #[error("malformed file at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("book {0} has neither a summary nor text")]
    MissingText(String),

    #[error("no reference label for book {0}")]
    MissingLabel(String),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Csv(err.to_string())
    }
}

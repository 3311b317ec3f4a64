use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("need at least two lists, got {0}")]
    TooFewLists(usize),

    #[error("{path}: duplicate header name `{name}`")]
    DuplicateHeader { path: PathBuf, name: String },

    #[error("{path}: missing column `{name}`")]
    MissingColumn { path: PathBuf, name: String },

    #[error("{path}, row {row}: cannot parse {field} value `{value}`")]
    BadDate {
        path: PathBuf,
        row: usize,
        field: String,
        value: String,
    },

    #[error("{path}, row {row}: required field `{field}` is empty")]
    RequiredMissing {
        path: PathBuf,
        row: usize,
        field: String,
    },

    #[error("both token lists are empty")]
    EmptyComparison,

    #[error("value {value} of field `{field}` falls outside every disagreement interval")]
    OutOfRange { field: String, value: f64 },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("posterior has zero total mass")]
    ZeroMass,

    #[error("degenerate chain: {0}")]
    DegenerateChain(String),

    #[error("unsupported number of lists K={0}")]
    UnsupportedK(usize),

    #[error("missing {0}")]
    Missing(String),

    #[error("{0}")]
    Parse(String),

    #[error("{0}")]
    Invalid(String),

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
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

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}

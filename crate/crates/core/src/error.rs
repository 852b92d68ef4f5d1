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

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("self-loop on node `{node}` (line {line})")]
    SelfLoop { node: String, line: usize },

    #[error("hypernym graph contains a cycle through edge `{child}` -> `{parent}`")]
    Cycle { child: String, parent: String },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("no information content for node `{0}`")]
    MissingInformationContent(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset is empty after pruning")]
    EmptyDataset,

    #[error("cannot normalize: all values are equal ({0})")]
    DegenerateRange(f64),

    #[error(
        "non-finite loss {loss} at epoch {epoch}, batch {batch} (pair `{first}`, `{second}`)"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        first: String,
        second: String,
        loss: f64,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
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

    /// Process exit code: 1 usage, 2 data error, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::NonFiniteLoss { .. } => 3,
            _ => 2,
        }
    }
}

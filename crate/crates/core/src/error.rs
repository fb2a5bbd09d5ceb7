use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("target evaluation failed: {0}")]
    Target(#[from] TargetError),
    /// The evaluation or wall-clock budget ran out before the step could run.
    #[error("budget exhausted")]
    BudgetExhausted,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown subject `{0}`")]
    UnknownSubject(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("failed to launch `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: io::Error,
    },
    #[error("target did not answer within {0} ms")]
    Timeout(u64),
    #[error("target process exited or closed its pipes: {0}")]
    Crashed(String),
    #[error("unparsable target response {0:?}")]
    Unparsable(String),
    #[error("non-finite tick {0}")]
    NonFinite(f64),
    #[error("genome length {actual} does not match target length {expected}")]
    GenomeLength { expected: usize, actual: usize },
    #[error("{0}")]
    Other(String),
}

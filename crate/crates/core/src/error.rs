use alloc::string::String;

/// Errors raised by every module of the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unknown group tag `{0}`")]
    UnknownGroup(String),
    #[error("event `{0}` does not occur in the trace")]
    EventNotFound(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),
    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

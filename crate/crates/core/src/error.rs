use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("singular design matrix (condition estimate {condition:e})")]
    SingularDesign { condition: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("conditional variance not positive at t = {t} (h2 = {h2})")]
    PositivityViolation { t: i64, h2: f64 },

    #[error("bootstrap gave up after {attempts} attempts with singular designs")]
    BootstrapExhausted { attempts: usize },

    #[error("replication failed in cell {cell}: {reason}")]
    ReplicationFailed { cell: String, reason: String },

    #[error("table is missing cells: {}", .missing.join("; "))]
    IncompleteTable { missing: Vec<String> },

    #[error("parse error: {0}")]
    Parse(String),
}

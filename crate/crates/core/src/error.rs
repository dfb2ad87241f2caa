use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error in {op}: left is {left:?}, right is {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("state error: {0}")]
    State(String),

    #[error("schema error: expected {expected} encoded columns, got {got}")]
    Schema { expected: usize, got: usize },

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {msg}")]
    Divergence {
        epoch: usize,
        batch: usize,
        msg: String,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("model artifact error: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Shape { op, left, right }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

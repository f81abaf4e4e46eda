use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("log of non-positive value {0}")]
    LogDomain(f64),
    #[error("{op} expects {expected} input(s), got {got}")]
    Arity { op: String, expected: usize, got: usize },
    #[error("variable #{0} does not belong to this tape")]
    ForeignVar(usize),
    #[error("{0} of an empty list")]
    Empty(&'static str),
    #[error("length mismatch in {what}: {left} vs {right}")]
    LengthMismatch { what: &'static str, left: usize, right: usize },
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: String, expected: usize, got: usize },
    #[error("top-k requires 1 <= k <= {n}, got {k}")]
    TopK { k: usize, n: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown formula `{0}`")]
    UnknownFormula(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("in formula `{formula}`: {source}")]
    InFormula {
        formula: String,
        #[source]
        source: Box<Error>,
    },
    #[error("schema: {0}")]
    Schema(String),
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

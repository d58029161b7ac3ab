use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MorError {
    #[error("coordinate {k} out of range for output dimension {dim}")]
    CoordinateRange { k: usize, dim: usize },
    #[error("label kind mismatch: {0}")]
    KindMismatch(String),
    #[error("instance {0} is not in the domain")]
    Domain(u64),
    #[error("arity mismatch: expected {expected} components, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate loss: {0}")]
    DegenerateLoss(String),
    #[error("invalid class: {0}")]
    InvalidClass(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("expert set needs {requested} experts, above the cap of {cap}; reduce T or beta")]
    ExpertCap { requested: String, cap: usize },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("unsupported feedback: {0}")]
    UnsupportedFeedback(String),
    #[error("config error at {path}: {msg}")]
    Config { path: String, msg: String },
    #[error("report schema error: {0}")]
    ReportSchema(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, MorError>;

impl From<std::io::Error> for MorError {
    fn from(e: std::io::Error) -> Self {
        MorError::Io(e.to_string())
    }
}

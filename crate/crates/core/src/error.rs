use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FinslerError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("degenerate flag: {0}")]
    DegenerateFlag(String),
    #[error("numeric error: {msg} (residual {residual:.3e})")]
    Numeric { msg: String, residual: f64 },
    #[error("expression error at column {column}: {msg}")]
    Expr { msg: String, column: usize },
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("stability violation: {0}")]
    Stability(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for FinslerError {
    fn from(e: std::io::Error) -> Self {
        FinslerError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FinslerError>;

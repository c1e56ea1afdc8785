use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fitting stopped after {completed} of {requested} rounds: sampler exhausted")]
    Fitting { completed: usize, requested: usize },
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("oracle scope error: {0}")]
    OracleScope(String),
    #[error("collection error: need {needed} states, only {available} available")]
    Collection { needed: usize, available: usize },
    #[error("usage error: {0}")]
    Usage(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Shape { .. } => "shape",
            Error::Domain(_) => "domain",
            Error::Fitting { .. } => "fitting",
            Error::Estimation(_) => "estimation",
            Error::OracleScope(_) => "oracle_scope",
            Error::Collection { .. } => "collection",
            Error::Usage(_) => "usage",
            Error::NonFinite(_) => "non_finite",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}

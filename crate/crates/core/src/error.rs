use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scalar function: {0}")]
    InvalidFunction(String),

    #[error("limit not resolved: {what} (residual {residual:e})")]
    LimitNotResolved { what: String, residual: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("construction error: {0}")]
    Construction(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("component {index} is not in class D_r: {reason}")]
    Class { index: usize, reason: String },
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("degenerate distribution: {0}")]
    Degenerate(String),
    #[error("undefined ratio: {0}")]
    Undefined(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}

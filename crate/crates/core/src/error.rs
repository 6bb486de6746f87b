use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical consistency error: {0}")]
    Numerical(String),

    #[error("malformed test function: {0}")]
    Structure(String),

    #[error("test function rejected: {0}")]
    Rejected(String),

    #[error("sequence condition failed ({condition}): {detail}")]
    Sequence { condition: String, detail: String },

    #[error("covariance matrix is indefinite beyond jitter; worst eigenvalue {worst:e}")]
    Indefinite { worst: f64 },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("time grid is missing jump point t = {0}")]
    MissingJump(f64),

    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("incompatible criterion: {0}")]
    Incompatible(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missing certificate: {0}")]
    MissingCertificate(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data could not be parsed or failed validation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A supplied norm does not behave like a symmetric monotone norm.
    #[error("input is not a valid norm: {0}")]
    NotANorm(String),

    /// An enumeration would exceed its configured cap.
    #[error("{what}: size {needed} exceeds cap {cap}")]
    Sizing { what: String, needed: f64, cap: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    /// A guarantee that should hold by construction was violated.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn sizing(what: impl Into<String>, needed: f64, cap: u64) -> Self {
        Error::Sizing { what: what.into(), needed, cap }
    }

    /// True for cap and budget aborts.
    pub fn is_sizing(&self) -> bool {
        matches!(self, Error::Sizing { .. })
    }
}

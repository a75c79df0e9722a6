use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("instance too large: {0}")]
    Size(String),

    #[error("stabilization exceeded the cap of {cap} instruction executions")]
    StepCap { cap: u64 },

    #[error("logic error: {0}")]
    Logic(String),

    #[error("invalid value for `{key}`: {msg}")]
    Usage { key: String, msg: String },

    #[error("malformed instruction tape: {0}")]
    Tape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Usage {
            key: key.into(),
            msg: msg.into(),
        }
    }
}

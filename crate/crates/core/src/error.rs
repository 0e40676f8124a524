use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field parameters: {0}")]
    InvalidField(String),

    #[error("element {element} is outside the universe [0, {universe})")]
    Domain { element: u64, universe: u64 },

    #[error("family of size {size} exceeds the enumeration cap of {cap}")]
    EnumerationCap { size: String, cap: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration mismatch: {0}")]
    Config(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("malformed sketch file: field `{field}`: {reason}")]
    Load { field: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}

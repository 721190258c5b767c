use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite value produced by `{primitive}`")]
    NumericFailure { primitive: &'static str },
}

pub type Result<T> = std::result::Result<T, NumericsError>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(NumericsError::Contract(msg.into()))
}

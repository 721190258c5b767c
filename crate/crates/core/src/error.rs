use thiserror::Error;
use xgen_numerics::NumericsError;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("{stage} diverged at epoch {epoch} (last finite loss {last_finite_loss})")]
    TrainingFailure { stage: String, epoch: usize, last_finite_loss: f64 },
    #[error("{0}")]
    Degenerate(String),
    #[error("{path}: {detail}")]
    Io { path: String, detail: String },
    #[error("unknown {kind} `{name}`; expected one of {expected:?}")]
    Unknown { kind: &'static str, name: String, expected: Vec<&'static str> },
}

pub type Result<T> = std::result::Result<T, CoreError>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(CoreError::Contract(msg.into()))
}

pub(crate) fn io_error(path: &std::path::Path, detail: impl std::fmt::Display) -> CoreError {
    CoreError::Io { path: path.display().to_string(), detail: detail.to_string() }
}

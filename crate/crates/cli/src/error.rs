use thiserror::Error;
use xgen_core::CoreError;
use xgen_exact::ExactError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing artifact {path}; run `xgen {stage}` first")]
    MissingArtifact { path: String, stage: &'static str },
    #[error("stale artifact {path}: {detail}; rerun `xgen {stage}`")]
    StaleArtifact { path: String, stage: &'static str, detail: String },
    #[error("{path}: {detail}")]
    Io { path: String, detail: String },
    #[error("net violates the structural assumptions: {0}")]
    Structure(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

impl HarnessError {
    /// Stable identifier printed in the machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::MissingArtifact { .. } => "missing-artifact",
            HarnessError::StaleArtifact { .. } => "stale-artifact",
            HarnessError::Io { .. } => "io",
            HarnessError::Structure(_) => "structure",
            HarnessError::Core(CoreError::TrainingFailure { .. }) => "training-failure",
            HarnessError::Core(CoreError::Contract(_)) => "contract",
            HarnessError::Core(_) => "core",
            HarnessError::Exact(ExactError::Precondition { .. }) => "precondition",
            HarnessError::Exact(_) => "exact",
        }
    }

    /// Stage that has to run to fix the error, when there is one.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            HarnessError::MissingArtifact { stage, .. } | HarnessError::StaleArtifact { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// One-line JSON object `{"error": kind, "stage": ..., "message": ...}`.
    pub fn to_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "stage": self.stage(), "message": self.to_string() }).to_string()
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_error(path: &std::path::Path, detail: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), detail: detail.to_string() }
}

use thiserror::Error;

/// Assumption names used in precondition errors.
pub mod assumption {
    pub const STRUCTURE: &str = "structural assumptions (no Z->X, no Z-Z, S childless with parents in Z)";
    pub const SELECTED_MASS: &str = "P(S=1) > 0";
    pub const NOVEL_MASS: &str = "P(Z=1) > 0";
    pub const MARGINAL_COVERAGE: &str = "P(Z_i=1 | S=1) > 0 for every block";
    pub const NO_SHARED: &str = "no feature shared between blocks and no edges across blocks";
    pub const BLOCK_INDEPENDENCE: &str = "blocks conditionally independent given the shared features";
    pub const FEATURE_INDEPENDENCE: &str =
        "non-shared features independent of features outside their block given the shared features";
    pub const FEATURE_COVERAGE: &str = "every feature is shared or a parent of some block";
    pub const OVERLAP: &str = "some shared-feature value has positive given-data density under every block";
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("malformed network: {0}")]
    Malformed(String),
    #[error("state space of {states} entries exceeds the enumeration bound of {bound}")]
    EnumerationBound { states: u128, bound: usize },
    #[error("undefined conditional: the event {event} has zero probability")]
    UndefinedConditional { event: String },
    #[error("variable {0} is not in the factor scope")]
    NotInScope(usize),
    #[error("factor scopes differ: {0:?} vs {1:?}")]
    ScopeMismatch(Vec<usize>, Vec<usize>),
    #[error("precondition failed ({assumption}): {detail}")]
    Precondition { assumption: &'static str, detail: String },
    #[error("no positive point exists: {0}")]
    ExistenceFailure(String),
    #[error("division by zero given-data density at shared-feature value {cell:?}")]
    DivisionSingularity { cell: Vec<usize> },
    #[error("no non-identifiability witness found: {reason} (best total variation {best_tv})")]
    WitnessNotFound { reason: String, best_tv: f64 },
    #[error("net file: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, ExactError>;

pub(crate) fn precondition<T>(assumption: &'static str, detail: impl Into<String>) -> Result<T> {
    Err(ExactError::Precondition { assumption, detail: detail.into() })
}

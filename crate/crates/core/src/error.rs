use std::path::PathBuf;

/// Errors produced by the simulator, learners and orchestration layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("episode already finished (slot {slot} of {slots})")]
    EpisodeFinished { slot: usize, slots: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("all {0} tasks failed in meta iteration")]
    AllTasksFailed(usize),
    #[error("unknown value {value:?} for attribute {attribute:?}")]
    UnknownAttributeValue { attribute: String, value: String },
    #[error("attribute vector does not match schema: {0}")]
    Schema(String),
    #[error("registry has no super model for {0:?}")]
    NoSuperModel(String),
    #[error("category node {0} holds no PLVNs")]
    EmptyCategory(String),
    #[error("unknown category {0}")]
    UnknownCategory(String),
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("script error: {0}")]
    Script(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

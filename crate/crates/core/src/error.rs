use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid model spec: {0}")]
    ModelSpec(String),

    #[error("non-finite loss for datum {index}: {value}")]
    NonFiniteLoss { index: usize, value: f64 },

    #[error("conjugate gradients broke down at iteration {iteration}")]
    CgBreakdown { iteration: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training diverged in {phase} at epoch {epoch}, step {step}: {reason}")]
    Training {
        phase: &'static str,
        epoch: usize,
        step: usize,
        reason: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("IDX format error in {field}: {message}")]
    IdxFormat { field: &'static str, message: String },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),

    #[error("invalid config:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("{0}")]
    Refused(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

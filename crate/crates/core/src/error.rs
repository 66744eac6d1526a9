use thiserror::Error;

use crate::dynamics::PhaseState;

/// Errors produced by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scheme `{scheme}` is not supported for model `{model}`: {reason}")]
    UnsupportedScheme {
        scheme: &'static str,
        model: String,
        reason: &'static str,
    },

    #[error("integration diverged at tau={:.6}; last valid state q={}, p={}", .last_valid.tau, .last_valid.q, .last_valid.p)]
    Diverged { last_valid: PhaseState },

    #[error("no closed orbit at energy {energy}: {reason}")]
    NoClosedOrbit { energy: f64, reason: String },

    #[error("no x-point: {0}")]
    NoXPoint(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver did not converge after {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("training diverged at epoch {epoch} (loss {loss:e})")]
    TrainingDiverged {
        epoch: usize,
        loss: f64,
        history: Vec<crate::rom::EpochLoss>,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("model `{0}` does not have the required structure: {1}")]
    ModelStructure(String, &'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

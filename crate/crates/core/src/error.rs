use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation core.
#[derive(Debug, Error)]
pub enum QfdError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} out of range for a {dims}D grid")]
    AxisOutOfRange { axis: usize, dims: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("field is not normalized: integral = {integral}")]
    NotNormalized { integral: f64 },

    #[error("non-finite value at step {step} (t = {t}): {detail}")]
    NonFinite { step: usize, t: f64, detail: String },

    #[error("invalid reduced density matrix: {0}")]
    InvalidRdm(String),

    #[error("circulation loop touches masked point ({i}, {j})")]
    MaskedLoopPoint { i: usize, j: usize },

    #[error("too few trajectories: {got} < {need}")]
    TooFewTrajectories { got: usize, need: usize },

    #[error("unknown exchange-correlation functional `{0}`")]
    UnknownXc(String),

    #[error("self-consistent iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NotConverged {
        iterations: usize,
        last_change: f64,
        history: Vec<f64>,
    },

    #[error("observer failed: {0}")]
    Observer(String),

    #[error("format error in {path:?}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QfdError {
    pub fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        QfdError::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = QfdError> = std::result::Result<T, E>;

use thiserror::Error;

/// Errors produced by the numerical kernels and experiment recipes.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("trajectory diverged at step {step} (|x| = {norm:e})")]
    Diverged { step: usize, norm: f64 },

    #[error("sinkhorn potentials became non-finite (residual {residual}, cap {iterations} iterations)")]
    SinkhornNonConvergence { iterations: usize, residual: f64 },

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("general position check failed: {0}")]
    GeneralPosition(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn ensure_finite(x: &[f64], what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LabError::InvalidInput(format!("{what} has non-finite coordinates")))
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(LabError::DimensionMismatch { expected, got })
    }
}

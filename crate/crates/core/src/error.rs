use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum HviError {
    /// Shapes or settings that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value outside the domain of the operation (non-positive variance,
    /// non-binary observation, inverse temperature outside (0, 1], ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The flow produced a non-finite state or adjoint.
    #[error("integration error at step {step}: {message}")]
    Integration { step: usize, message: String },

    /// Planar flow log-determinant argument collapsed towards zero.
    #[error("numerical singularity: |1 + u^T psi| = {0:e}")]
    Singularity(f64),

    /// Training produced a non-finite objective.
    #[error("non-finite loss at epoch {epoch}: {snapshot}")]
    NonFiniteLoss { epoch: usize, snapshot: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HviError>;

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(HviError::Config(format!(
            "{what}: expected length {want}, got {got}"
        )));
    }
    Ok(())
}

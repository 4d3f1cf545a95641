use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("component index {index} out of range for {len} components")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error(
        "noise covariance is not positive definite (gamma={gamma}, u={u}, eta={eta}, det={determinant})"
    )]
    NoiseNotPositiveDefinite {
        gamma: f64,
        u: f64,
        eta: f64,
        determinant: f64,
    },

    #[error("chain diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("matrix has eigenvalue {eigenvalue} below the PSD tolerance")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
}

impl Error {
    /// True for errors caused by how the API was called, as opposed to
    /// numerical failures during evaluation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::IndexOutOfRange { .. }
                | Error::DimensionMismatch { .. }
                | Error::InvalidParameter { .. }
                | Error::InsufficientSamples { .. }
        )
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn ensure_positive(value: f64, name: &'static str) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: "must be finite and > 0",
        })
    }
}

use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("mode {index} has eigenvalue {eigenvalue:e}, below the rank threshold {threshold:e}")]
    RankDeficient {
        index: usize,
        eigenvalue: f64,
        threshold: f64,
    },

    #[error("{solver} did not converge at step {step}: relative residual {residual:e}")]
    NotConverged {
        solver: &'static str,
        step: usize,
        residual: f64,
    },

    #[error("singular dense system at step {step}")]
    Singular { step: usize },

    #[error("reduced solution diverged at step {step}")]
    Diverged { step: usize },

    #[error("alpha calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

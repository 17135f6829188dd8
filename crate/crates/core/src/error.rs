use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite state at integration step {step}")]
    NonFiniteState { step: usize },

    #[error("reparameterization density is nonpositive ({value}) at {point:?}")]
    NonPositiveDensity { value: f64, point: [f64; 3] },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("kernel row {row} has nonpositive mass")]
    ZeroRowSum { row: usize },

    #[error("kernel entry ({row}, {col}) is negative or non-finite")]
    InvalidKernelEntry { row: usize, col: usize },

    #[error("sparsity pattern is reducible ({components} connected components)")]
    Disconnected { components: usize },

    #[error("eigensolver did not converge after {iterations} iterations (max residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("second Markov eigenvalue equals one ({lambda1}); the kernel graph is disconnected")]
    DegenerateUnitEigenvalue { lambda1: f64 },

    #[error("eigenvalue {index} is too small for extension ({lambda:e})")]
    SmallEigenvalue { index: usize, lambda: f64 },

    #[error("cache format: {0}")]
    Format(String),

    #[error("metadata: {0}")]
    Metadata(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

use alloc::string::String;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unphysical variance {0} (must be >= 1 SNU)")]
    UnphysicalVariance(f64),

    #[error("mode `{0}` not present in state")]
    MissingMode(String),

    #[error("mode `{0}` already present in state")]
    DuplicateMode(String),

    #[error("matrix is numerically singular")]
    NumericallySingular,

    #[error("matrix is not symmetric (residual {0:e})")]
    NotSymmetric(f64),

    #[error("unphysical state: symplectic eigenvalue {0} < 1")]
    UnphysicalState(f64),

    #[error("degenerate modulator configuration: {0}")]
    DegenerateConfig(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("insufficient samples: {got} < {min}")]
    InsufficientSamples { got: usize, min: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

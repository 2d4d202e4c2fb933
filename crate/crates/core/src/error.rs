//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the numerical kernels, the physics layer, and the
/// estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a precondition (bad dimension, non-finite entry, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An iterative numerical procedure failed to converge or broke down.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The Lindbladian null space is not one-dimensional.
    #[error("degenerate system: {0}")]
    DegenerateSystem(String),

    /// The detection phase is undefined (|chi'| = 0).
    #[error("undefined phase: {0}")]
    UndefinedPhase(String),

    /// PSL noise coefficient diverges (cos(varphi) = 0).
    #[error("unbounded noise: {0}")]
    UnboundedNoise(String),

    /// A target scene violates the model assumptions (K >= M, coincident
    /// DOAs, target closer than the path-loss reference distance, ...).
    #[error("invalid scene: {0}")]
    InvalidScene(String),

    /// Configuration file could not be read or parsed.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure while emitting results.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

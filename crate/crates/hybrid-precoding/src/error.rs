//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix or vector dimension does not match its contract.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// A scalar argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Water-filling over an all-zero singular spectrum.
    #[error("degenerate channel: all singular values are zero")]
    DegenerateChannel,

    /// Sphere projection of the zero vector during an ADMM y-update.
    /// Recoverable: the caller may perturb the dual variable and retry.
    #[error("degenerate projection: ||x + nu|| = 0 at the sphere projection")]
    DegenerateProjection,

    /// An RF precoding matrix is not block-diagonal with constant-modulus
    /// entries.
    #[error("RF structure violation: {0}")]
    RfStructure(String),

    /// Configuration file or parameter validation failure.
    #[error("config error: {0}")]
    Config(String),

    /// An operation precondition stated by the API contract was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

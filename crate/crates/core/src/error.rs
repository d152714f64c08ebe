//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible matrix or vector dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A rank condition on collected data failed.
    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    /// Random key generation exhausted its retry budget.
    #[error("key generation failed: {0}")]
    KeyGeneration(String),

    /// A matrix that must be invertible is numerically singular.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Observed data cannot be explained by the declared disturbance bound.
    #[error("inconsistent data: {0}")]
    InconsistentData(String),

    /// The privacy budget is empty (gamma must be positive).
    #[error("no privacy budget: gamma must be positive, got {0}")]
    NoPrivacyBudget(f64),

    /// A simulation was requested with an unstable closed loop.
    #[error("unstable closed loop: {0}")]
    UnstableClosedLoop(String),

    /// The bias-injection design problem has no solution.
    #[error("attack undefined: {0}")]
    AttackUndefined(String),

    /// A numerical routine failed to converge or verify.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// File I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Malformed file content.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

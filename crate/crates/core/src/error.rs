//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("space mismatch: expected {expected}, got {got}")]
    SpaceMismatch { expected: String, got: String },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),

    #[error("integration diverged at t={t}, step {step} (dt={dt})")]
    IntegrationDiverged { t: f64, step: usize, dt: f64 },

    #[error(
        "truncation breach at t={t}: top-band leakage {leakage:.3e} exceeds ceiling {ceiling:.3e}; \
         increase the Fock dims"
    )]
    TruncationBreach { t: f64, leakage: f64, ceiling: f64 },

    #[error("trajectory not converged: final mass on the kernel manifold is {final_mass}")]
    NotConverged { final_mass: f64 },

    #[error("oracle too large: superoperator dimension {dim} exceeds ceiling {ceiling}")]
    OracleTooLarge { dim: usize, ceiling: usize },

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("commutator structure violated: residual {residual:.3e} (implementation bug)")]
    StructureViolation { residual: f64 },
}

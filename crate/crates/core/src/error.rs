use thiserror::Error;

/// Errors surfaced by the numerical routines.
///
/// `InvalidInput` marks parameter or domain violations caught before any
/// computation starts. `Unsupported` marks structurally valid inputs outside a
/// routine's mathematical scope (wrong dimension, generator without the
/// required monotonicity). `NoConvergence` is an exhausted iteration budget.
/// The two data errors belong to the uniform-model posterior construction.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("inconsistent data: {0}")]
    InconsistentData(String),

    #[error("no valid posterior-median density: {0}")]
    NoValidDensity(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

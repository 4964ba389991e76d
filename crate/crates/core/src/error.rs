use thiserror::Error;

use crate::model::ValidationReport;

/// Errors raised by the equilibrium engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(ValidationReport),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("negative quantity {0} passed where a nonnegative value is required")]
    NegativeQuantity(f64),

    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("year {year} outside the trajectory span {first}..={last}")]
    YearOutOfSpan { year: i32, first: i32, last: i32 },

    #[error("empty budget window {start}..{end}")]
    EmptyWindow { start: i32, end: i32 },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("unknown technology `{0}`")]
    UnknownTechnology(String),

    #[error(transparent)]
    NonConvergence(Box<crate::solver::NonConvergence>),

    #[error("planner problem infeasible: {0}")]
    Infeasible(String),

    #[error("planner problem unbounded: {0}")]
    Unbounded(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
}

pub type Result<T> = std::result::Result<T, Error>;

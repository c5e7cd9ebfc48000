use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("negative or non-finite mass {value} at ({row}, {col})")]
    NegativeMass { row: usize, col: usize, value: f64 },
    #[error("total mass {total} differs from 1 by more than the tolerance")]
    MassNotOne { total: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("cannot estimate a distribution from an empty sample set")]
    EmptySampleSet,
    #[error("sample index out of range: {0}")]
    SampleOutOfRange(String),
    #[error("beta must lie in (0, 1), got {0}")]
    InvalidBeta(f64),
    #[error("ball intersected with the constraint set is empty: {0}")]
    InfeasibleConstraint(String),
    #[error("invalid order alpha: {0}")]
    InvalidAlpha(String),
    #[error("optimizer did not reach tolerance {tolerance} within {iterations} iterations (gap {gap})")]
    OptimizerNotConverged { iterations: usize, tolerance: f64, gap: f64 },
    #[error("margin u must lie in (0, 1], got {0}")]
    InvalidMargin(f64),
    #[error("measure {0} requires a margin floor in its bound context")]
    MissingMargin(String),
    #[error("cannot certify {measure}: {reason}")]
    NotCertifiable { measure: String, reason: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("shrunk budget is infeasible: {0}")]
    InfeasibleShrunkBudget(String),
    #[error("no lattice mechanism satisfies the uniform privacy constraint")]
    EmptyFeasibleSet,
    #[error("distance to an empty set of mechanisms is undefined")]
    EmptySet,
    #[error("label {0:?} collides with the reserved sink symbol")]
    ReservedLabelCollision(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

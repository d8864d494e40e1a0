use thiserror::Error;

/// Errors produced by the factorization library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid grid spacing {0}: must be positive and finite")]
    InvalidSpacing(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("degenerate column: wavenumber undefined for a zero vector")]
    DegenerateColumn,
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("step-size failure: objective rose from {before} to {after}")]
    StepSizeFailure { before: f64, after: f64 },
    #[error("certificate inconsistency: append numerator {numerator} is not positive")]
    CertificateInconsistency { numerator: f64 },
    #[error("mask has no observed entries")]
    EmptyMask,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unstable time step: Courant number {courant} exceeds 1")]
    Unstable { courant: f64 },
    #[error("invalid index list: {0}")]
    InvalidIndices(String),
    #[error("energy fractions in row {row} sum to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use alloc::string::String;

/// Errors produced by the core model and pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("spheres already in contact: distance {r} <= margins sum {contact}")]
    AlreadyInContact { r: f64, contact: f64 },
    #[error("encounter outside collision cone: |alpha| = {alpha} > alpha_c = {alpha_c}")]
    OutsideCone { alpha: f64, alpha_c: f64 },
    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("relative speed is zero")]
    ZeroSpeed,
    #[error("axis mismatch between compared grids")]
    AxisMismatch,
    #[error("empty search range")]
    EmptySearchRange,
    #[error("objective is flat over the search range (residual {residual})")]
    NoImprovement { residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParam(&'static str),
    #[error("infeasible scenario: {0}")]
    Infeasible(&'static str),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("detector failure: {0}")]
    Detector(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_range(what: &'static str, value: f64, lo: f64, hi: f64) -> Result<f64> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(Error::OutOfRange { what, value })
    }
}

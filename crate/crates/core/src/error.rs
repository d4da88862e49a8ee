use thiserror::Error;

/// Errors raised by the lab.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("dimension {n} is not supported: {reason}")]
    UnsupportedDimension { n: i64, reason: String },

    #[error("dimension {0} is a pole of the coefficient formulas")]
    PoleDimension(i64),

    #[error("empty dimension range {min}..={max}")]
    EmptyRange { min: i64, max: i64 },

    #[error("certification failed for n = {n}: {check}")]
    CertificationFailed { n: i64, check: String },

    #[error("radial moment diverges for p = {p}, beta = {beta}")]
    Divergent { p: f64, beta: f64 },

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("degenerate Weyl form (S = 0)")]
    DegenerateWeyl,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("overlapping bump supports at index {0}")]
    OverlappingSupports(u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

use thiserror::Error;

/// Errors raised by operator construction and analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("factor dimension must be at least 1 (factor `{0}`)")]
    ZeroDimension(String),

    #[error("duplicate factor name `{0}`")]
    DuplicateFactor(String),

    #[error("unknown factor name `{0}`")]
    UnknownFactor(String),

    #[error("invalid factor permutation: {0}")]
    InvalidPermutation(String),

    #[error("matrix is {rows}x{cols} but factors require {expected}x{expected}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
    },

    #[error("factor lists differ: {0}")]
    FactorMismatch(String),

    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not positive semi-definite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("trace is {actual} but {expected} was required")]
    BadTrace { actual: f64, expected: f64 },

    #[error("inconsistent Kraus operator shapes: {0}")]
    KrausShape(String),

    #[error("instrument elements do not share factors: {0}")]
    InconsistentInstrument(String),

    #[error("map is not trace preserving (deviation {0:.3e})")]
    NotTracePreserving(f64),

    #[error("basis is rank deficient or ill conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("dimension must be at least {min}, got {got}")]
    DimensionTooSmall { min: usize, got: usize },

    #[error("mixing coefficients are invalid: {0}")]
    InvalidCoefficients(String),

    #[error("outcome probability {0:.3e} is below the conditioning floor")]
    ZeroProbability(f64),

    #[error("malformed process tensor: {0}")]
    MalformedProcess(String),

    #[error("invalid block partition: {0}")]
    InvalidPartition(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("recovery map does not reproduce the distribution (residual {residual:.3e})")]
    RecoveryFailed { residual: f64 },

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

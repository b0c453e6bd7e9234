use thiserror::Error;

/// Errors raised across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Taylor order must be odd, got {0}")]
    EvenOrder(u32),

    #[error("origin is not interior to the domain box")]
    OriginNotInterior,

    #[error("component {0} is not polynomial")]
    NonPolynomial(usize),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("Jacobian at the equilibrium is not Hurwitz (max real part {0:.3e})")]
    NotHurwitz(f64),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("Gram matrix is numerically singular: {0}")]
    SingularGram(String),

    #[error("no Taylor series available for component {0}")]
    NoSeries(usize),

    #[error("linear program is infeasible")]
    LpInfeasible,

    #[error("linear program is unbounded")]
    LpUnbounded,

    #[error("linear program solver stalled after {0} iterations")]
    LpIterationLimit(usize),

    #[error("SOS degree mismatch: {0}")]
    DegreeMismatch(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("basin sampling aborted: acceptance rate {rate:.2e} after {tried} draws")]
    BasinTooSmall { rate: f64, tried: usize },

    #[error("nesting hypothesis violated at {witness:?}")]
    NestingViolated { witness: Vec<f64> },

    #[error("certificates are incompatible: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix has non-finite or malformed entries: {0}")]
    InvalidMatrix(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("matrix is numerically singular or not positive definite: {0}")]
    SingularInput(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("auxiliary rate {index} is {value}; rates must be finite and nonnegative")]
    InvalidAuxRate { index: usize, value: f64 },
    #[error("subset must be nonempty")]
    EmptySubset,
    #[error("theta must be positive and finite, got {0}")]
    InvalidTheta(f64),
    #[error("{0} encoders is too many for full subset enumeration")]
    SubsetExplosion(usize),
    #[error("region bounds are not supermodular")]
    NotSupermodular,
    #[error("water-filling budget is short by {deficit}")]
    InfeasibleBudget { deficit: f64 },
    #[error("distortion target is not achievable: {0}")]
    InfeasibleDistortion(String),
    #[error("split leaves a singular or indefinite source covariance")]
    SingularSplit,
    #[error("distortion weights must be at least 1")]
    InvalidWeights,
    #[error("correlation must lie in [0, 1), got {0}")]
    InvalidCorrelation(f64),
    #[error("distortion must be positive and finite, got {0}")]
    InvalidDistortion(f64),
    #[error("eigenvalue {mu} coincides with the noise level")]
    DegenerateEigenvalue { mu: f64 },
    #[error("covariance is not cyclic shift invariant (residual {residual:e})")]
    NotShiftInvariant { residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

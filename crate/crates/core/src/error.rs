use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: {0}")]
    InputShape(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("covariance matrix not factorizable after adding jitter {jitter:e}")]
    Conditioning { jitter: f64 },

    #[error("expanded task covariance is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    InvalidTaskCovariance { min_eigenvalue: f64 },

    #[error("fidelity {index} is constant and cannot serve as a sample basis")]
    DegenerateFidelity { index: usize },

    #[error("sample basis covariance is ill-conditioned (condition number {condition:e}); try a different seed or fewer fidelities")]
    IllConditionedBasis { condition: f64 },

    #[error("heuristic sample variance is {0}; the correlation vector has no overlap with the basis")]
    ZeroSampleVariance(f64),

    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelationMatrix(String),

    #[error("correlation {value} for entry {index} is outside the valid range [{lower:.6}, {upper:.6}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("correlation session already has all {0} entries")]
    SessionExhausted(usize),

    #[error("correlation spec is incomplete: {chosen} of {expected} entries chosen")]
    IncompleteSpec { chosen: usize, expected: usize },

    #[error("correlation spec was validated against a different basis")]
    BasisMismatch,

    #[error("point {row} lies outside the benchmark domain")]
    Domain { row: usize },

    #[error("unknown benchmark `{0}` (expected one of: liu, currin)")]
    UnknownBenchmark(String),

    #[error("hyperparameter fit failed on every restart: {}", .causes.join("; "))]
    Fit { causes: Vec<String> },

    #[error("{0}")]
    Usage(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("unsupported archive schema version {0}")]
    Schema(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical pipeline, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Conditioning { .. }
                | Error::InvalidTaskCovariance { .. }
                | Error::DegenerateFidelity { .. }
                | Error::IllConditionedBasis { .. }
                | Error::ZeroSampleVariance(_)
                | Error::InvalidCorrelationMatrix(_)
                | Error::Fit { .. }
        )
    }
}

use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants split into two groups that the command-line front end maps to
/// different exit codes: input validation problems and numerical failures
/// (see [`WdroError::is_numerical`]).
#[derive(Debug, Error)]
pub enum WdroError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("robust loss is unbounded: inner supremum is +inf for every multiplier in the search bracket")]
    UnboundedRobustLoss,

    #[error("no inner-supremum solver for {family} on {domain} domain")]
    NoSolver { family: String, domain: String },

    #[error("loss has no known Lipschitz norm")]
    MissingLipschitz,

    #[error("loss has no gradient or gradient-Lipschitz constant")]
    MissingGradient,

    #[error("oracle enumeration too large: {0}")]
    TooLarge(String),

    #[error("sample size {n} below the minimum {min_n} required by the radius rule")]
    MinSampleSize { n: u64, min_n: u64 },

    #[error("feasible set is empty: {0}")]
    InfeasibleProjection(String),

    #[error("{context}: row {row}: {message}")]
    Data {
        context: String,
        row: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl WdroError {
    /// Short machine-readable name of the variant.
    pub fn name(&self) -> &'static str {
        match self {
            WdroError::DimensionMismatch { .. } => "DimensionMismatch",
            WdroError::InvalidDistribution(_) => "InvalidDistribution",
            WdroError::InvalidInput(_) => "InvalidInput",
            WdroError::UnboundedRobustLoss => "UnboundedRobustLoss",
            WdroError::NoSolver { .. } => "NoSolver",
            WdroError::MissingLipschitz => "MissingLipschitz",
            WdroError::MissingGradient => "MissingGradient",
            WdroError::TooLarge(_) => "TooLarge",
            WdroError::MinSampleSize { .. } => "MinSampleSize",
            WdroError::InfeasibleProjection(_) => "InfeasibleProjection",
            WdroError::Data { .. } => "DataError",
            WdroError::Io(_) => "IoError",
            WdroError::Csv(_) => "CsvError",
            WdroError::Json(_) => "JsonError",
        }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, WdroError::UnboundedRobustLoss | WdroError::MinSampleSize { .. })
    }
}

pub type Result<T> = std::result::Result<T, WdroError>;

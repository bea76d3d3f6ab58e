use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid rate table: {0}")]
    InvalidRates(String),

    #[error("{what} = {value} is out of range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: i64,
        lo: i64,
        hi: i64,
    },

    #[error("state {to} is not reachable from state {from}: {reason}")]
    Unreachable { from: usize, to: usize, reason: String },

    #[error("degenerate interval: lower rate {lower} must be below upper rate {upper}")]
    DegenerateInterval { lower: f64, upper: f64 },

    #[error("degenerate denominator in mixture weight: lambda1 = sqrt(lambda2 * lambda_m) = {0}")]
    DegenerateWeight(f64),

    #[error("generator is not valid: eigenvalue {value} at rank {rank} is not positive")]
    NonPositiveEigenvalue { rank: usize, value: f64 },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("simulation exceeded the step cap of {0} events")]
    StepCapExceeded(u64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidRates(_) => "invalid_rates",
            Error::OutOfRange { .. } => "out_of_range",
            Error::Unreachable { .. } => "unreachable",
            Error::DegenerateInterval { .. } => "degenerate_interval",
            Error::DegenerateWeight(_) => "degenerate_weight",
            Error::NonPositiveEigenvalue { .. } => "non_positive_eigenvalue",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::StepCapExceeded(_) => "step_cap_exceeded",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

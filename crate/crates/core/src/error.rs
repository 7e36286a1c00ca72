use thiserror::Error;

/// Errors produced by the model, stability and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("time scale `{name}` must be positive, got {value}")]
    NonPositiveTimeScale { name: &'static str, value: f64 },

    #[error("amplitude `{name}` must be non-negative, got {value}")]
    NegativeAmplitude { name: &'static str, value: f64 },

    #[error("state component `{field}` = {value} is below the domain floor {floor}")]
    StateOutOfDomain {
        field: &'static str,
        value: f64,
        floor: f64,
    },

    #[error("unsupported time-scale scaling: {0}")]
    UnsupportedScaling(String),

    #[error("criterion applies only when c = c1 (got c = {c}, c1 = {c1})")]
    ScalingOutOfScope { c: f64, c1: f64 },

    #[error("criterion out of scope: {0}")]
    OutOfScope(String),

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    ConvergenceFailure { iterations: usize },

    #[error("polynomial division remainder {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("polynomial degree {degree} outside the supported range 1..=5")]
    DegreeOutOfRange { degree: usize },

    #[error("trajectory blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Variant name, stable across message wording changes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveTimeScale { .. } => "NonPositiveTimeScale",
            Error::NegativeAmplitude { .. } => "NegativeAmplitude",
            Error::StateOutOfDomain { .. } => "StateOutOfDomain",
            Error::UnsupportedScaling(_) => "UnsupportedScaling",
            Error::ScalingOutOfScope { .. } => "ScalingOutOfScope",
            Error::OutOfScope(_) => "OutOfScope",
            Error::ConvergenceFailure { .. } => "ConvergenceFailure",
            Error::ResidualTooLarge { .. } => "ResidualTooLarge",
            Error::DegreeOutOfRange { .. } => "DegreeOutOfRange",
            Error::BlowUp { .. } => "BlowUp",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }

    /// Failures of the numerics rather than of the inputs.
    pub fn is_runtime(&self) -> bool {
        matches!(
            self,
            Error::ConvergenceFailure { .. } | Error::ResidualTooLarge { .. } | Error::BlowUp { .. }
        )
    }
}

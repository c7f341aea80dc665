use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by metric computation, index computation, scheduling and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("unsupported loss: {0}")]
    UnsupportedLoss(String),

    #[error("support error: {0}")]
    Support(String),

    #[error("absolute continuity violated at symbol index {index}: p = {p}, q = 0")]
    AbsoluteContinuity { index: usize, p: f64 },

    #[error("insufficient data for theta = {theta}")]
    InsufficientData { theta: usize },

    #[error("distribution over theta is not supported within theta_max = {theta_max}")]
    SupportExceedsHorizon { theta_max: usize },

    #[error("distributions are not stochastically ordered: {0}")]
    NotStochasticallyOrdered(String),

    #[error("invalid penalty curve: {0}")]
    InvalidPenalty(String),

    #[error("invalid service-time distribution: {0}")]
    InvalidService(String),

    #[error("truncation mass {mass:e} beyond t_max = {t_max} exceeds 1e-6")]
    ExcessiveTruncation { mass: f64, t_max: usize },

    #[error("search horizon {tau_max} is below the safe horizon {required}")]
    HorizonTooShort { tau_max: usize, required: usize },

    #[error("threshold {beta} exceeds the supremum {sup} of the Gittins index")]
    UnreachableThreshold { beta: f64, sup: f64 },

    #[error("precondition violated: {0}")]
    Misuse(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),

    #[error("{path}: line {line}: {message}")]
    Format {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by malformed or missing inputs rather than by the computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Format { .. }
                | Error::Io { .. }
                | Error::Config(_)
                | Error::UnknownPolicy(_)
                | Error::InvalidPenalty(_)
                | Error::InvalidService(_)
                | Error::InvalidDistribution(_)
                | Error::InvalidAlphabet(_)
        )
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

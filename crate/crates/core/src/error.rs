use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A function was evaluated outside of its domain (non-finite input,
    /// negative variance, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter or configuration value failed validation. `field` is the
    /// dotted path of the offending value relative to its container.
    #[error("{field}: {message}")]
    InvalidParameter { field: String, message: String },

    #[error("population index {index} out of range (model has {count})")]
    PopulationOutOfRange { index: usize, count: usize },

    #[error("time {t} outside of [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    /// The deterministic mean-field integrator failed.
    #[error("integration failed at step {step} (t = {time}): {reason}")]
    Integration { step: usize, time: f64, reason: String },

    /// A stochastic trajectory left the guarded region or became non-finite.
    #[error("blow-up at step {step} (t = {time}): |x| = {value}")]
    BlowUp { step: usize, time: f64, value: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integration { .. } | Error::BlowUp { .. } | Error::InsufficientData(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

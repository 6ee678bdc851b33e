//! Error type shared across the library.

/// Library-wide error enum.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value is inconsistent or out of its admissible range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A numeric procedure failed (non-finite value, unbracketed root, ...).
    #[error("numeric failure at step {step}: {msg}")]
    Numeric { step: usize, msg: String },

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data violates a documented contract.
    #[error("data error: {0}")]
    Data(String),

    /// A calibrated table failed its admissibility checks.
    #[error("calibration rejected: {0}")]
    CalibrationRejected(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(step: usize, msg: impl Into<String>) -> Self {
        Error::Numeric {
            step,
            msg: msg.into(),
        }
    }
}

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The four data-line gains sum to zero; no Z-basis statistics exist.
    #[error("no detection on the data line")]
    NoDetection,

    /// The logic-sequence monitoring gains sum to zero.
    #[error("no detection on the monitoring line")]
    NoMonitoringDetection,

    #[error("invalid scan configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient samples: {got} < {min}")]
    InsufficientSamples { got: u64, min: u64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::InvalidParameter {
        name,
        value,
        reason,
    }
}

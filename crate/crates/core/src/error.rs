use thiserror::Error;

/// Errors raised by the simulation, estimation and fitting routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("relative phase undefined: the {0} amplitude vanishes")]
    UndefinedPhase(&'static str),

    #[error("uncertainty diverges at phi = {phi} (sin phi = 0); use the simplified estimate instead")]
    Divergent { phi: f64 },

    #[error("degenerate scan grid: {0}")]
    DegenerateGrid(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}

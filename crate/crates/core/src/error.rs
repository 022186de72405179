use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The jump law has tail exponent zero, so `v** = +inf`.
    #[error("critical speed is unbounded: jump law has zero tail exponent")]
    UnboundedSpeed,

    #[error("speed {v} is below the critical speed {v_star}")]
    BelowCritical { v: f64, v_star: f64 },

    /// A step needed a clamp/monotone projection larger than the tolerance.
    #[error("stability violation at t={time}: projection changed values by {change:e}")]
    StabilityViolation { time: f64, change: f64 },

    /// The right edge of the grid lost mass; the window is too narrow.
    #[error("mass leak at t={time}: right-edge value {edge_value} below 1 - {tolerance:e}")]
    MassLeak {
        time: f64,
        edge_value: f64,
        tolerance: f64,
    },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("phi0={phi0} does not yield a proper boundary wave")]
    Phi0TooLarge { phi0: f64 },

    #[error("tail window holds {samples} samples, need at least {required}")]
    WindowTooShort { samples: usize, required: usize },
}

impl Error {
    /// Numeric failures (as opposed to input validation errors).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::StabilityViolation { .. } | Error::MassLeak { .. } | Error::NonConvergence(_)
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

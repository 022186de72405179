use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Boundary variants shared by the particle system and the mean-field dynamics.
///
/// Right boundaries block: a jump that would overshoot lands on the boundary.
/// A fixed right boundary absorbs. The moving left boundary drags particles
/// forward; particles behind it jump from the boundary position.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundarySpec {
    #[default]
    None,
    FixedRight { b: f64 },
    MovingRight { b0: f64, v: f64 },
    MovingLeft { a0: f64, v: f64 },
}

impl BoundarySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BoundarySpec::None => Ok(()),
            BoundarySpec::FixedRight { b } if b.is_finite() => Ok(()),
            BoundarySpec::MovingRight { b0, v } | BoundarySpec::MovingLeft { a0: b0, v }
                if b0.is_finite() && v > 0.0 && v.is_finite() =>
            {
                Ok(())
            }
            other => Err(invalid(format!("invalid boundary {other:?}"))),
        }
    }

    /// Position of a right boundary at time `t`.
    pub fn right_at(&self, t: f64) -> Option<f64> {
        match *self {
            BoundarySpec::FixedRight { b } => Some(b),
            BoundarySpec::MovingRight { b0, v } => Some(b0 + v * t),
            _ => None,
        }
    }

    /// Position of the left boundary at time `t`.
    pub fn left_at(&self, t: f64) -> Option<f64> {
        match *self {
            BoundarySpec::MovingLeft { a0, v } => Some(a0 + v * t),
            _ => None,
        }
    }
}

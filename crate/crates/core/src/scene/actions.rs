use serde::{Deserialize, Serialize};

use super::rigid::Pose;
use crate::error::{Error, Result};

/// Box and per-step rate limits on cup poses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    /// Largest `|theta|`, radians.
    pub theta: f64,
    /// Largest `|y|`, meters.
    pub y: f64,
    /// Largest `|Δtheta|` between consecutive poses, radians.
    pub dtheta: f64,
    /// Largest `|Δy|` between consecutive poses, meters.
    pub dy: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        ActionBounds {
            theta: 2.8973,
            y: 0.1,
            dtheta: 2.1973,
            dy: 0.02,
        }
    }
}

const SLACK: f64 = 1e-12;

impl ActionBounds {
    /// Verifies every pose and every step from `start` through `actions`.
    pub fn check(&self, start: Pose, actions: &[Pose]) -> Result<()> {
        let mut prev = start;
        for (t, a) in actions.iter().enumerate() {
            if !(a.theta.abs() <= self.theta + SLACK && a.y.abs() <= self.y + SLACK) {
                return Err(Error::Parameter(format!(
                    "pose {t} ({}, {}) outside bounds",
                    a.theta, a.y
                )));
            }
            if !((a.theta - prev.theta).abs() <= self.dtheta + SLACK && (a.y - prev.y).abs() <= self.dy + SLACK) {
                return Err(Error::Parameter(format!("step {t} exceeds rate limits")));
            }
            prev = *a;
        }
        Ok(())
    }

    /// Clips each pose into the box, then sweeps forward clipping steps to
    /// the rate limits. The result always passes [`ActionBounds::check`] when
    /// `start` is inside the box.
    pub fn clip(&self, start: Pose, actions: &mut [Pose]) {
        let mut prev = start;
        for a in actions.iter_mut() {
            a.theta = a.theta.clamp(-self.theta, self.theta);
            a.y = a.y.clamp(-self.y, self.y);
            a.theta = a.theta.clamp(prev.theta - self.dtheta, prev.theta + self.dtheta);
            a.y = a.y.clamp(prev.y - self.dy, prev.y + self.dy);
            prev = *a;
        }
    }
}

//! Piecewise-constant desired pace `gamma_dot_d(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous step profile: `initial` until the first breakpoint, then
/// the value of the latest breakpoint whose time is `<= t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaceProfile {
    pub initial: f64,
    #[serde(default)]
    pub breakpoints: Vec<[f64; 2]>,
}

impl PaceProfile {
    pub fn constant(value: f64) -> Self {
        Self {
            initial: value,
            breakpoints: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial.is_finite() && self.initial > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "desired pace must be positive, got {}",
                self.initial
            )));
        }
        let mut prev = f64::NEG_INFINITY;
        for &[t, v] in &self.breakpoints {
            if !(t.is_finite() && t > prev && t >= 0.0) {
                return Err(Error::InvalidParameter(
                    "pace breakpoints must have strictly increasing, nonnegative times".into(),
                ));
            }
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "desired pace must be positive, got {v} at t = {t}"
                )));
            }
            prev = t;
        }
        Ok(())
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.breakpoints
            .iter()
            .take_while(|bp| bp[0] <= t)
            .last()
            .map_or(self.initial, |bp| bp[1])
    }

    /// Breakpoint times strictly inside `(from, to]`.
    pub fn breaks_in(&self, from: f64, to: f64) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints
            .iter()
            .map(|bp| bp[0])
            .filter(move |&t| t > from && t <= to)
    }
}

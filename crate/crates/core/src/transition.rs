//! Logistic smooth transition in the time index.
//!
//! `F(t) = 1 / (1 + exp(-gamma (t - c))) - 1/2`, bounded in `[-1/2, 1/2]`,
//! zero at the threshold and identically zero when `gamma = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this magnitude `exp` of the exponent would overflow an `f64`.
const EXP_SAFE: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionParams {
    /// Smoothness per time unit. Zero means no transition.
    pub gamma: f64,
    /// Threshold location in time-index units.
    pub c: f64,
}

impl TransitionParams {
    pub fn new(gamma: f64, c: f64) -> Result<Self> {
        let p = Self { gamma, c };
        p.validate()?;
        Ok(p)
    }

    /// The null: `gamma = 0`. The threshold is irrelevant but kept positive.
    pub fn none() -> Self {
        Self { gamma: 0.0, c: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "transition gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        if !self.c.is_finite() || self.c <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "transition threshold c must be finite and > 0, got {}",
                self.c
            )));
        }
        Ok(())
    }

    pub fn is_null(&self) -> bool {
        self.gamma == 0.0
    }
}

/// Value of the transition function at (real) time `t`.
pub fn transition_value(t: f64, p: &TransitionParams) -> f64 {
    if p.gamma == 0.0 {
        return 0.0;
    }
    let x = p.gamma * (t - p.c);
    if x >= 0.0 {
        if x > EXP_SAFE {
            return 0.5;
        }
        1.0 / (1.0 + (-x).exp()) - 0.5
    } else {
        if x < -EXP_SAFE {
            return -0.5;
        }
        // mirror branch: exp(x) cannot overflow for x < 0
        let e = x.exp();
        e / (1.0 + e) - 0.5
    }
}

/// `transition_value` over `t = t_start, ..., t_start + len - 1`.
pub fn transition_series(len: usize, p: &TransitionParams, t_start: i64) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::EmptyInput("transition series length must be >= 1"));
    }
    Ok((0..len as i64)
        .map(|i| transition_value((t_start + i) as f64, p))
        .collect())
}

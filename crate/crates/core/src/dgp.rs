//! Data-generating processes: AR(1) mean with optional smooth time-varying
//! intercept/slope, and unit-normal, ARCH(1), or smooth time-varying ARCH(1)
//! errors.
//!
//! The recursion runs over `t = 1 - burn_in, ..., T` starting from
//! `y_0 = u_0 = 0`, and the first `burn_in` values are dropped. The transition
//! argument is the same `t`, so the threshold `c` lives on the retained index
//! range `1..=T` and the transition is continuous across the burn-in boundary.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transition::{transition_value, TransitionParams};

pub const DEFAULT_BURN_IN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanParams {
    pub alpha0: f64,
    pub beta0: f64,
    #[serde(default)]
    pub alpha1: f64,
    #[serde(default)]
    pub beta1: f64,
    #[serde(default = "TransitionParams::none")]
    pub transition: TransitionParams,
}

impl MeanParams {
    /// Linear AR(1): `y_t = alpha0 + beta0 y_{t-1} + u_t`.
    pub fn ar(alpha0: f64, beta0: f64) -> Self {
        Self {
            alpha0,
            beta0,
            alpha1: 0.0,
            beta1: 0.0,
            transition: TransitionParams::none(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.transition.validate()?;
        let finite = [self.alpha0, self.beta0, self.alpha1, self.beta1]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("mean parameters must be finite".into()));
        }
        let regime_hi = self.beta0 + self.beta1.abs() / 2.0;
        let regime_lo = self.beta0 - self.beta1.abs() / 2.0;
        if self.beta0.abs() >= 1.0 || regime_hi.abs() >= 1.0 || regime_lo.abs() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "AR regimes must be stationary: beta0 = {}, beta1 = {}",
                self.beta0, self.beta1
            )));
        }
        Ok(())
    }

    fn has_time_variation(&self) -> bool {
        self.alpha1 != 0.0 || self.beta1 != 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceParams {
    pub a0: f64,
    pub b0: f64,
    #[serde(default)]
    pub a1: f64,
    #[serde(default)]
    pub b1: f64,
    #[serde(default = "TransitionParams::none")]
    pub transition: TransitionParams,
}

impl VarianceParams {
    /// Plain ARCH(1): `h_t^2 = a0 + b0 u_{t-1}^2`.
    pub fn arch(a0: f64, b0: f64) -> Self {
        Self {
            a0,
            b0,
            a1: 0.0,
            b1: 0.0,
            transition: TransitionParams::none(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.transition.validate()?;
        let finite = [self.a0, self.b0, self.a1, self.b1]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "variance parameters must be finite".into(),
            ));
        }
        if self.a0 - self.a1.abs() / 2.0 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "ARCH intercept must stay positive: a0 - |a1|/2 = {}",
                self.a0 - self.a1.abs() / 2.0
            )));
        }
        if self.b0 - self.b1.abs() / 2.0 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "ARCH slope must stay non-negative: b0 - |b1|/2 = {}",
                self.b0 - self.b1.abs() / 2.0
            )));
        }
        if self.b0 >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "ARCH slope b0 must be < 1 for weak stationarity, got {}",
                self.b0
            )));
        }
        Ok(())
    }

    fn has_time_variation(&self) -> bool {
        self.a1 != 0.0 || self.b1 != 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    ArHomoskedastic,
    TvMean,
    ArArch,
    TvArch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorProcess {
    UnitNormal,
    Arch(VarianceParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub mean: MeanParams,
    pub variance: ErrorProcess,
    pub sample_size: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl DgpSpec {
    pub fn ar_homoskedastic(alpha0: f64, beta0: f64, sample_size: usize) -> Self {
        Self {
            kind: DgpKind::ArHomoskedastic,
            mean: MeanParams::ar(alpha0, beta0),
            variance: ErrorProcess::UnitNormal,
            sample_size,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn tv_mean(mean: MeanParams, sample_size: usize) -> Self {
        Self {
            kind: DgpKind::TvMean,
            mean,
            variance: ErrorProcess::UnitNormal,
            sample_size,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn ar_arch(alpha0: f64, beta0: f64, a0: f64, b0: f64, sample_size: usize) -> Self {
        Self {
            kind: DgpKind::ArArch,
            mean: MeanParams::ar(alpha0, beta0),
            variance: ErrorProcess::Arch(VarianceParams::arch(a0, b0)),
            sample_size,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn tv_arch(alpha0: f64, beta0: f64, variance: VarianceParams, sample_size: usize) -> Self {
        Self {
            kind: DgpKind::TvArch,
            mean: MeanParams::ar(alpha0, beta0),
            variance: ErrorProcess::Arch(variance),
            sample_size,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Same process at a different length. When `midpoint` is set, every
    /// active transition threshold is moved to `T / 2`.
    pub fn resized(mut self, sample_size: usize, midpoint: bool) -> Self {
        self.sample_size = sample_size;
        if midpoint {
            let c = sample_size as f64 / 2.0;
            self.mean.transition.c = c;
            if let ErrorProcess::Arch(v) = &mut self.variance {
                v.transition.c = c;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_size == 0 {
            return Err(Error::InvalidParameter("sample size must be >= 1".into()));
        }
        self.mean.validate()?;
        if let ErrorProcess::Arch(v) = &self.variance {
            v.validate()?;
        }
        let kind_err = |msg: &str| Err(Error::InvalidParameter(format!("{:?}: {msg}", self.kind)));
        match (self.kind, &self.variance) {
            (DgpKind::ArHomoskedastic, ErrorProcess::UnitNormal) => {
                if self.mean.has_time_variation() {
                    return kind_err("alpha1 and beta1 must be zero");
                }
            }
            (DgpKind::ArHomoskedastic | DgpKind::TvMean, ErrorProcess::Arch(_)) => {
                return kind_err("error process must be unit normal");
            }
            (DgpKind::TvMean, ErrorProcess::UnitNormal) => {}
            (DgpKind::ArArch | DgpKind::TvArch, ErrorProcess::UnitNormal) => {
                return kind_err("an ARCH error process is required");
            }
            (DgpKind::ArArch, ErrorProcess::Arch(v)) => {
                if v.has_time_variation() {
                    return kind_err("a1 and b1 must be zero");
                }
            }
            (DgpKind::TvArch, ErrorProcess::Arch(_)) => {
                if self.mean.has_time_variation() {
                    return kind_err("alpha1 and beta1 must be zero");
                }
            }
        }
        Ok(())
    }
}

/// A simulated sample. `latent_h2` is the conditional variance path, kept
/// for checking the simulator; the tests only ever read `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    latent_h2: Option<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            latent_h2: None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn latent_h2(&self) -> Option<&[f64]> {
        self.latent_h2.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl From<Vec<f64>> for TimeSeries {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

/// Draw one sample path from `spec`.
pub fn simulate<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<TimeSeries> {
    spec.validate()?;
    let total = spec.sample_size + spec.burn_in;
    let first_t = 1 - spec.burn_in as i64;
    let mean = &spec.mean;

    let mut values = Vec::with_capacity(spec.sample_size);
    let mut latent = Vec::with_capacity(spec.sample_size);
    let (mut y_prev, mut u_prev) = (0.0f64, 0.0f64);

    for step in 0..total {
        let t = first_t + step as i64;
        let eps: f64 = rng.sample(StandardNormal);
        let (u, h2) = match &spec.variance {
            ErrorProcess::UnitNormal => (eps, 1.0),
            ErrorProcess::Arch(v) => {
                let f = transition_value(t as f64, &v.transition);
                let u2 = u_prev * u_prev;
                let h2 = v.a0 + v.b0 * u2 + (v.a1 + v.b1 * u2) * f;
                if !(h2 > 0.0) || !h2.is_finite() {
                    return Err(Error::PositivityViolation { t, h2 });
                }
                (h2.sqrt() * eps, h2)
            }
        };
        let f = transition_value(t as f64, &mean.transition);
        let y = mean.alpha0 + mean.beta0 * y_prev + (mean.alpha1 + mean.beta1 * y_prev) * f + u;
        if step >= spec.burn_in {
            values.push(y);
            latent.push(h2);
        }
        y_prev = y;
        u_prev = u;
    }

    Ok(TimeSeries {
        values,
        latent_h2: Some(latent),
    })
}

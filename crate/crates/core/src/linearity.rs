//! Taylor-expansion linearity tests against a smooth time-varying mean or a
//! smooth time-varying ARCH variance.
//!
//! Mean side: regress `y_t` on `[1, y_{t-1}, s_t, s_t y_{t-1}]` and test the
//! two trend coefficients jointly (`Ma`, F reference), or calibrate the same
//! statistic with a wild bootstrap around the null AR(1) fit (`Mwb`).
//!
//! Variance side: fit the AR(1) mean, square the residuals, regress them on
//! `[1, u2_{t-1}, s_t, s_t u2_{t-1}]` and test all three slopes against the
//! intercept-only model (`Va`, F reference; `Tr2`, n R^2 against chi-square).
//! `Vb` resamples the centred squared residuals with replacement, `Vwb`
//! multiplies each by an independent draw.
//!
//! Bootstrap p-values are `#{stat* > stat} / M` with draw `m` using its own
//! stream derived from `(seed, m)`, so the result is the same sequentially or
//! across any number of threads.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use crate::dgp::TimeSeries;
use crate::error::{Error, Result};
use crate::ols::{lag_trend_design, ols_fit, DesignMatrix, QrDecomposition};
use crate::rng::{child_stream, domain, StreamRng};

/// Shortest series any test accepts.
pub const MIN_TEST_LEN: usize = 10;
pub const MIN_BOOTSTRAP_ITERATIONS: usize = 99;
pub const DEFAULT_BOOTSTRAP_ITERATIONS: usize = 1000;
/// Singular bootstrap draws are redrawn up to this many times `M` in total.
const REDRAW_FACTOR: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ma,
    Mwb,
    Va,
    Vb,
    Vwb,
    Tr2,
}

impl Method {
    /// The five tests tabulated in the rejection-frequency tables.
    pub const TABLE: [Method; 5] = [Method::Ma, Method::Mwb, Method::Va, Method::Vb, Method::Vwb];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ma => "Ma",
            Method::Mwb => "Mwb",
            Method::Va => "Va",
            Method::Vb => "Vb",
            Method::Vwb => "Vwb",
            Method::Tr2 => "TR2",
        }
    }

    pub fn is_bootstrap(self) -> bool {
        matches!(self, Method::Mwb | Method::Vb | Method::Vwb)
    }

    fn stream_tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ma" => Ok(Method::Ma),
            "mwb" => Ok(Method::Mwb),
            "va" => Ok(Method::Va),
            "vb" => Ok(Method::Vb),
            "vwb" => Ok(Method::Vwb),
            "tr2" => Ok(Method::Tr2),
            other => Err(Error::Parse(format!("unknown test method '{other}'"))),
        }
    }
}

/// Distribution of the wild-bootstrap multipliers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplier {
    #[default]
    StandardNormal,
    Rademacher,
}

impl Multiplier {
    fn draw(self, rng: &mut StreamRng) -> f64 {
        match self {
            Multiplier::StandardNormal => rng.sample(StandardNormal),
            Multiplier::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// How the mean-test wild bootstrap builds its regressors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanBootstrapScheme {
    /// `y*_t = phi0 + phi1 y_{t-1} + e*_t`, re-regressed on the observed design.
    #[default]
    FixedDesign,
    /// `y*_t = phi0 + phi1 y*_{t-1} + e*_t`, with design rebuilt from `y*`.
    Recursive,
}

/// Regressors used when the variance bootstraps re-estimate the auxiliary
/// regression.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceBootstrapScheme {
    /// `h*_t` regressed on `[1, h*_{t-1}, s, s h*_{t-1}]`.
    #[default]
    OwnLag,
    /// `h*_t` regressed on the observed `[1, u^2_{t-1}, s, s u^2_{t-1}]`.
    FixedDesign,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub multiplier: Multiplier,
    pub seed: u64,
    pub mean_scheme: MeanBootstrapScheme,
    pub variance_scheme: VarianceBootstrapScheme,
    /// Spread the draws over the rayon pool. Results are unaffected.
    pub parallel: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_BOOTSTRAP_ITERATIONS,
            multiplier: Multiplier::StandardNormal,
            seed: 0,
            mean_scheme: MeanBootstrapScheme::FixedDesign,
            variance_scheme: VarianceBootstrapScheme::OwnLag,
            parallel: false,
        }
    }
}

impl BootstrapConfig {
    pub fn with_seed(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < MIN_BOOTSTRAP_ITERATIONS {
            return Err(Error::InvalidParameter(format!(
                "bootstrap iterations must be >= {MIN_BOOTSTRAP_ITERATIONS}, got {}",
                self.iterations
            )));
        }
        Ok(())
    }
}

/// Reference distribution the p-value was read from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    F { df1: usize, df2: usize },
    ChiSquared { df: usize },
    Bootstrap { iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub reference: Reference,
}

/// Joint restriction statistics from one auxiliary regression.
#[derive(Debug, Clone, Copy, PartialEq)]
struct AuxStatistic {
    /// F form: `((SSR0 - SSR1) / q) / (SSR1 / (rows - 4))`
    f: f64,
    /// `1 - SSR1 / SSR0`, with SSR0 from the intercept-only model.
    r_squared: f64,
    rows: usize,
}

/// Restricted/unrestricted comparison on an already factored 4-column design.
/// `restricted` is the number of leading columns kept under the null.
fn aux_statistic(qr: &QrDecomposition, target: &[f64], restricted: usize) -> Result<AuxStatistic> {
    let mut z = target.to_vec();
    qr.apply_qt(&mut z);
    let k = qr.cols();
    let rows = qr.rows();
    let ssr1 = QrDecomposition::ssr_leading(&z, k);
    let extra: f64 = z[restricted..k].iter().map(|v| v * v).sum();
    let ssr_const = ssr1 + z[1..k].iter().map(|v| v * v).sum::<f64>();
    if !(ssr1 > 0.0) || !ssr1.is_finite() {
        return Err(Error::SingularDesign {
            condition: f64::INFINITY,
        });
    }
    let q = (k - restricted) as f64;
    let f = (extra / q) / (ssr1 / (rows - k) as f64);
    Ok(AuxStatistic {
        f,
        r_squared: 1.0 - ssr1 / ssr_const,
        rows,
    })
}

fn lag_trend_statistic(series: &[f64], restricted: usize) -> Result<AuxStatistic> {
    let (design, target) = lag_trend_design(series)?;
    let qr = QrDecomposition::new(&design)?;
    aux_statistic(&qr, &target, restricted)
}

fn check_len(y: &TimeSeries) -> Result<()> {
    if y.len() < MIN_TEST_LEN {
        return Err(Error::InsufficientData {
            needed: MIN_TEST_LEN,
            got: y.len(),
        });
    }
    if y.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("series contains non-finite values".into()));
    }
    Ok(())
}

fn f_upper_tail(stat: f64, df1: usize, df2: usize) -> f64 {
    let dist = FisherSnedecor::new(df1 as f64, df2 as f64).expect("positive degrees of freedom");
    dist.sf(stat).clamp(0.0, 1.0)
}

fn chi2_upper_tail(stat: f64, df: usize) -> f64 {
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    dist.sf(stat).clamp(0.0, 1.0)
}

/// Null AR(1) fit: `(phi0, phi1)` and residuals for `t = 2..T`.
fn ar1_fit(y: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    let n = y.len() - 1;
    let design = DesignMatrix::from_columns(&[vec![1.0; n], y[..n].to_vec()])?;
    let fit = ols_fit(&design, &y[1..])?;
    Ok((fit.coefficients[0], fit.coefficients[1], fit.residuals))
}

/// `#{draw > stat} / M`. Draws that hit a singular design are redrawn from
/// the same stream.
fn bootstrap_p_value<D>(stat: f64, cfg: &BootstrapConfig, tag: u64, draw: D) -> Result<f64>
where
    D: Fn(&mut StreamRng) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let cap = REDRAW_FACTOR * cfg.iterations;
    let one = |m: usize| -> Result<(bool, usize)> {
        let mut rng = child_stream(cfg.seed, &[domain::DRAW, tag, m as u64]);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match draw(&mut rng) {
                Ok(s) => return Ok((s > stat, attempts)),
                Err(Error::SingularDesign { .. }) if attempts < cap => continue,
                Err(Error::SingularDesign { .. }) => {
                    return Err(Error::BootstrapExhausted { attempts })
                }
                Err(e) => return Err(e),
            }
        }
    };
    let results: Vec<(bool, usize)> = if cfg.parallel {
        (0..cfg.iterations)
            .into_par_iter()
            .map(one)
            .collect::<Result<_>>()?
    } else {
        (0..cfg.iterations).map(one).collect::<Result<_>>()?
    };
    let attempts: usize = results.iter().map(|r| r.1).sum();
    if attempts > cap {
        return Err(Error::BootstrapExhausted { attempts });
    }
    let exceed = results.iter().filter(|r| r.0).count();
    Ok(exceed as f64 / cfg.iterations as f64)
}

/// `Ma`: F test of the trend and trend-interaction coefficients.
pub fn mean_test_asymptotic(y: &TimeSeries) -> Result<TestOutcome> {
    check_len(y)?;
    let stat = lag_trend_statistic(y.values(), 2)?;
    let df2 = stat.rows - 4;
    Ok(TestOutcome {
        statistic: stat.f,
        p_value: f_upper_tail(stat.f, 2, df2),
        method: Method::Ma,
        reference: Reference::F { df1: 2, df2 },
    })
}

/// `Mwb`: wild bootstrap of the `Ma` statistic around the null AR(1).
pub fn mean_test_wild_bootstrap(y: &TimeSeries, cfg: &BootstrapConfig) -> Result<TestOutcome> {
    check_len(y)?;
    cfg.validate()?;
    let values = y.values();
    let (design, target) = lag_trend_design(values)?;
    let qr = QrDecomposition::new(&design)?;
    let stat = aux_statistic(&qr, &target, 2)?.f;
    let (phi0, phi1, resid) = ar1_fit(values)?;
    let lagged = &values[..values.len() - 1];

    let p_value = match cfg.mean_scheme {
        MeanBootstrapScheme::FixedDesign => {
            let fitted: Vec<f64> = lagged.iter().map(|l| phi0 + phi1 * l).collect();
            bootstrap_p_value(stat, cfg, Method::Mwb.stream_tag(), |rng| {
                let ystar: Vec<f64> = fitted
                    .iter()
                    .zip(&resid)
                    .map(|(f, e)| f + cfg.multiplier.draw(rng) * e)
                    .collect();
                Ok(aux_statistic(&qr, &ystar, 2)?.f)
            })?
        }
        MeanBootstrapScheme::Recursive => {
            bootstrap_p_value(stat, cfg, Method::Mwb.stream_tag(), |rng| {
                let mut ystar = Vec::with_capacity(values.len());
                ystar.push(values[0]);
                for e in &resid {
                    let prev = *ystar.last().expect("seeded with first value");
                    ystar.push(phi0 + phi1 * prev + cfg.multiplier.draw(rng) * e);
                }
                Ok(lag_trend_statistic(&ystar, 2)?.f)
            })?
        }
    };
    Ok(TestOutcome {
        statistic: stat,
        p_value,
        method: Method::Mwb,
        reference: Reference::Bootstrap {
            iterations: cfg.iterations,
        },
    })
}

/// Squared residuals of the AR(1) mean fit. A fit that is exact up to
/// rounding leaves nothing to regress and is reported as singular.
fn squared_mean_residuals(y: &TimeSeries) -> Result<Vec<f64>> {
    check_len(y)?;
    let (_, _, resid) = ar1_fit(y.values())?;
    let u2: Vec<f64> = resid.iter().map(|e| e * e).collect();
    let scale = y.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rms = (u2.iter().sum::<f64>() / u2.len() as f64).sqrt();
    if rms <= 1e-12 * scale {
        return Err(Error::SingularDesign {
            condition: f64::INFINITY,
        });
    }
    Ok(u2)
}

/// `Va`: F test of the lagged, trend and interaction slopes of the squared
/// residual regression against the intercept-only model.
pub fn variance_test_asymptotic(y: &TimeSeries) -> Result<TestOutcome> {
    let u2 = squared_mean_residuals(y)?;
    let stat = lag_trend_statistic(&u2, 1)?;
    let df2 = stat.rows - 4;
    Ok(TestOutcome {
        statistic: stat.f,
        p_value: f_upper_tail(stat.f, 3, df2),
        method: Method::Va,
        reference: Reference::F { df1: 3, df2 },
    })
}

/// `TR2`: `n R^2` of the squared residual regression against chi-square(3).
pub fn variance_test_tr2(y: &TimeSeries) -> Result<TestOutcome> {
    let u2 = squared_mean_residuals(y)?;
    let stat = lag_trend_statistic(&u2, 1)?;
    let value = stat.rows as f64 * stat.r_squared.max(0.0);
    Ok(TestOutcome {
        statistic: value,
        p_value: chi2_upper_tail(value, 3),
        method: Method::Tr2,
        reference: Reference::ChiSquared { df: 3 },
    })
}

#[derive(Clone, Copy)]
enum VarianceResampling {
    Iid,
    Wild(Multiplier),
}

fn variance_bootstrap(
    y: &TimeSeries,
    cfg: &BootstrapConfig,
    scheme: VarianceResampling,
    method: Method,
) -> Result<TestOutcome> {
    cfg.validate()?;
    let u2 = squared_mean_residuals(y)?;
    let (design, target) = lag_trend_design(&u2)?;
    let qr = QrDecomposition::new(&design)?;
    let stat = aux_statistic(&qr, &target, 1)?.f;
    let n = u2.len();
    let rho0 = u2.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = u2.iter().map(|v| v - rho0).collect();

    let p_value = bootstrap_p_value(stat, cfg, method.stream_tag(), |rng| {
        let hstar: Vec<f64> = match scheme {
            VarianceResampling::Iid => (0..n)
                .map(|_| rho0 + centred[rng.random_range(0..n)])
                .collect(),
            VarianceResampling::Wild(mult) => {
                centred.iter().map(|v| rho0 + v * mult.draw(rng)).collect()
            }
        };
        match cfg.variance_scheme {
            VarianceBootstrapScheme::OwnLag => Ok(lag_trend_statistic(&hstar, 1)?.f),
            VarianceBootstrapScheme::FixedDesign => Ok(aux_statistic(&qr, &hstar[1..], 1)?.f),
        }
    })?;
    Ok(TestOutcome {
        statistic: stat,
        p_value,
        method,
        reference: Reference::Bootstrap {
            iterations: cfg.iterations,
        },
    })
}

/// `Vb`: residual bootstrap of the `Va` statistic.
pub fn variance_test_bootstrap(y: &TimeSeries, cfg: &BootstrapConfig) -> Result<TestOutcome> {
    variance_bootstrap(y, cfg, VarianceResampling::Iid, Method::Vb)
}

/// `Vwb`: wild bootstrap of the `Va` statistic.
pub fn variance_test_wild_bootstrap(y: &TimeSeries, cfg: &BootstrapConfig) -> Result<TestOutcome> {
    variance_bootstrap(y, cfg, VarianceResampling::Wild(cfg.multiplier), Method::Vwb)
}

/// Dispatch on `method`. Asymptotic methods ignore `cfg`.
pub fn run_test(method: Method, y: &TimeSeries, cfg: &BootstrapConfig) -> Result<TestOutcome> {
    match method {
        Method::Ma => mean_test_asymptotic(y),
        Method::Mwb => mean_test_wild_bootstrap(y, cfg),
        Method::Va => variance_test_asymptotic(y),
        Method::Vb => variance_test_bootstrap(y, cfg),
        Method::Vwb => variance_test_wild_bootstrap(y, cfg),
        Method::Tr2 => variance_test_tr2(y),
    }
}

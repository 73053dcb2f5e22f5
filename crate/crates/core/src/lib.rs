//! Linearity tests for smooth time-varying conditional mean and variance.
//!
//! The crate covers four pieces that are usually glued together:
//!
//! - [`transition`]: the logistic transition in the time index.
//! - [`dgp`]: AR(1) processes with smooth time-varying intercept/slope and
//!   ARCH(1) or smooth time-varying ARCH(1) errors, with burn-in.
//! - [`linearity`]: the Taylor-expansion tests `Ma`, `Mwb`, `Va`, `Vb`, `Vwb`
//!   and the `n R^2` variant, built on the least squares core in [`ols`].
//! - [`montecarlo`]: replicated size/power experiments with reproducible
//!   per-replication random streams, preset grids and table rendering.
//!
//! [`figures`] emits transition curves as CSV.

pub mod dgp;
pub mod error;
pub mod figures;
pub mod linearity;
pub mod montecarlo;
pub mod ols;
pub mod rng;
pub mod transition;

pub use dgp::{simulate, DgpKind, DgpSpec, ErrorProcess, MeanParams, TimeSeries, VarianceParams};
pub use error::{Error, Result};
pub use linearity::{
    mean_test_asymptotic, mean_test_wild_bootstrap, run_test, variance_test_asymptotic,
    variance_test_bootstrap, variance_test_tr2, variance_test_wild_bootstrap, BootstrapConfig,
    MeanBootstrapScheme, Method, Multiplier, Reference, TestOutcome, VarianceBootstrapScheme,
};
pub use montecarlo::{run_experiment, ExperimentConfig, RejectionTable};
pub use transition::{transition_series, transition_value, TransitionParams};

//! CSV data for plotting transition curves.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::transition::{transition_value, TransitionParams};

/// Columns `t,F_gamma_<g>,...` for `t = 1..=len`, one column per gamma.
pub fn emit_figure_data(len: usize, gammas: &[f64], c: f64) -> Result<String> {
    if gammas.is_empty() {
        return Err(Error::EmptyInput("at least one gamma is required"));
    }
    if len < 2 {
        return Err(Error::InsufficientData { needed: 2, got: len });
    }
    let params: Vec<TransitionParams> = gammas
        .iter()
        .map(|&g| TransitionParams::new(g, c))
        .collect::<Result<_>>()?;

    let mut out = String::from("t");
    for g in gammas {
        write!(out, ",F_gamma_{g}").unwrap();
    }
    out.push('\n');
    for t in 1..=len {
        write!(out, "{t}").unwrap();
        for p in &params {
            write!(out, ",{}", transition_value(t as f64, p)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

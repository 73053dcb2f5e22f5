//! Least squares via Householder QR, plus the lag/trend auxiliary designs.
//!
//! Both auxiliary regressions share one layout: for a series `x_1..x_n` the
//! rows are `t = 2..n` with columns `[1, x_{t-1}, s_t, s_t x_{t-1}]`, where
//! `s_t = t / n`. Because the decomposition is unpivoted, the leading `m`
//! reflectors also factor the first `m` columns, so restricted and
//! unrestricted sums of squares come out of a single rotation of the target.

use crate::error::{Error, Result};

/// Designs whose condition estimate exceeds this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Minimum series length accepted by the auxiliary design builders.
pub const MIN_DESIGN_LEN: usize = 8;

/// Dense column-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    /// Build from columns of equal length. Requires `rows > cols >= 1`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        if cols == 0 {
            return Err(Error::EmptyInput("design matrix needs at least one column"));
        }
        let rows = columns[0].len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch(
                "design columns have different lengths".into(),
            ));
        }
        if rows <= cols {
            return Err(Error::InsufficientData {
                needed: cols + 1,
                got: rows,
            });
        }
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            data.extend_from_slice(c);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    /// `X b`
    pub fn mul_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (j, &bj) in b.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(self.column(j)) {
                *o += x * bj;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub ssr: f64,
    /// `ssr / (n - k)`
    pub sigma2_hat: f64,
}

/// Householder QR of a design matrix.
#[derive(Debug, Clone)]
pub struct QrDecomposition {
    rows: usize,
    cols: usize,
    /// Reflector vectors below (and on) the diagonal, strict upper R above.
    packed: Vec<f64>,
    rdiag: Vec<f64>,
    beta: Vec<f64>,
}

impl QrDecomposition {
    pub fn new(x: &DesignMatrix) -> Result<Self> {
        let (n, k) = (x.rows, x.cols);
        let mut a = x.data.clone();
        let col_norms: Vec<f64> = (0..k).map(|j| norm(x.column(j))).collect();
        if col_norms.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::SingularDesign {
                condition: f64::INFINITY,
            });
        }
        let mut rdiag = vec![0.0; k];
        let mut beta = vec![0.0; k];
        for j in 0..k {
            let (head, tail) = a.split_at_mut((j + 1) * n);
            let v = &mut head[j * n + j..];
            let sigma = norm(v);
            if sigma == 0.0 {
                return Err(Error::SingularDesign {
                    condition: f64::INFINITY,
                });
            }
            let alpha = if v[0] > 0.0 { -sigma } else { sigma };
            v[0] -= alpha;
            let vnorm2: f64 = v.iter().map(|e| e * e).sum();
            rdiag[j] = alpha;
            beta[j] = 2.0 / vnorm2;
            for l in 0..(k - j - 1) {
                let target = &mut tail[l * n + j..(l + 1) * n];
                let s = beta[j] * dot(v, target);
                for (t, vi) in target.iter_mut().zip(v.iter()) {
                    *t -= s * vi;
                }
            }
        }

        // |r_jj| / ||x_j|| is the sine of the angle between column j and the
        // span of the preceding columns; its spread bounds the condition of
        // the column-equilibrated design from below.
        let ratios: Vec<f64> = rdiag
            .iter()
            .zip(&col_norms)
            .map(|(r, s)| r.abs() / s)
            .collect();
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::SingularDesign { condition });
        }
        Ok(Self {
            rows: n,
            cols: k,
            packed: a,
            rdiag,
            beta,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Overwrite `y` with `Q' y`.
    pub fn apply_qt(&self, y: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        let n = self.rows;
        for j in 0..self.cols {
            let v = &self.packed[j * n + j..(j + 1) * n];
            let target = &mut y[j..];
            let s = self.beta[j] * dot(v, target);
            for (t, vi) in target.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
    }

    /// Solve `R b = (Q'y)[..k]` by back substitution.
    pub fn solve_rotated(&self, qty: &[f64]) -> Vec<f64> {
        let (n, k) = (self.rows, self.cols);
        let mut b = qty[..k].to_vec();
        for i in (0..k).rev() {
            let mut acc = b[i];
            for l in (i + 1)..k {
                acc -= self.packed[l * n + i] * b[l];
            }
            b[i] = acc / self.rdiag[i];
        }
        b
    }

    /// Sum of squared residuals of the regression on the first `m` columns,
    /// given the rotated target `Q'y`.
    pub fn ssr_leading(qty: &[f64], m: usize) -> f64 {
        qty[m..].iter().map(|z| z * z).sum()
    }
}

/// Ordinary least squares fit of `y` on `x`.
pub fn ols_fit(x: &DesignMatrix, y: &[f64]) -> Result<RegressionFit> {
    if y.len() != x.rows {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows but target has length {}",
            x.rows,
            y.len()
        )));
    }
    let qr = QrDecomposition::new(x)?;
    let mut qty = y.to_vec();
    qr.apply_qt(&mut qty);
    let coefficients = qr.solve_rotated(&qty);
    let fitted = x.mul_vec(&coefficients);
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let ssr = residuals.iter().map(|e| e * e).sum::<f64>();
    let sigma2_hat = ssr / (x.rows - x.cols) as f64;
    Ok(RegressionFit {
        coefficients,
        residuals,
        ssr,
        sigma2_hat,
    })
}

/// `[1, x_{t-1}, t/n, (t/n) x_{t-1}]` for `t = 2..n`, target `x_t`.
pub(crate) fn lag_trend_design(x: &[f64]) -> Result<(DesignMatrix, Vec<f64>)> {
    let n = x.len();
    if n < MIN_DESIGN_LEN {
        return Err(Error::InsufficientData {
            needed: MIN_DESIGN_LEN,
            got: n,
        });
    }
    let rows = n - 1;
    let scale = n as f64;
    let mut data = Vec::with_capacity(rows * 4);
    data.extend(std::iter::repeat_n(1.0, rows));
    data.extend_from_slice(&x[..rows]);
    data.extend((2..=n).map(|t| t as f64 / scale));
    data.extend((2..=n).zip(&x[..rows]).map(|(t, lag)| t as f64 / scale * lag));
    let target = x[1..].to_vec();
    Ok((
        DesignMatrix {
            rows,
            cols: 4,
            data,
        },
        target,
    ))
}

/// Auxiliary regression for the time-varying mean test.
pub fn build_mean_design(y: &[f64]) -> Result<(DesignMatrix, Vec<f64>)> {
    lag_trend_design(y)
}

/// Auxiliary regression for the time-varying ARCH test on squared residuals.
pub fn build_variance_design(u2: &[f64]) -> Result<(DesignMatrix, Vec<f64>)> {
    if let Some(bad) = u2.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "squared residuals must be non-negative, found {bad}"
        )));
    }
    lag_trend_design(u2)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    // scaled to avoid overflow on large magnitudes
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * a.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Normal-equations solve with partial pivoting plus one refinement step.
    fn normal_equations_oracle(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let k = cols.len();
        let gram = |v: &dyn Fn(usize) -> f64| -> Vec<f64> {
            (0..k)
                .map(|i| cols[i].iter().enumerate().map(|(r, x)| x * v(r)).sum())
                .collect()
        };
        let solve = |rhs: Vec<f64>| -> Vec<f64> {
            let mut m: Vec<Vec<f64>> = (0..k)
                .map(|i| {
                    let mut row: Vec<f64> = (0..k)
                        .map(|j| cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum())
                        .collect();
                    row.push(rhs[i]);
                    row
                })
                .collect();
            for p in 0..k {
                let piv = (p..k)
                    .max_by(|&a, &b| m[a][p].abs().total_cmp(&m[b][p].abs()))
                    .unwrap();
                m.swap(p, piv);
                for r in (p + 1)..k {
                    let f = m[r][p] / m[p][p];
                    for c in p..=k {
                        m[r][c] -= f * m[p][c];
                    }
                }
            }
            let mut b = vec![0.0; k];
            for i in (0..k).rev() {
                let s: f64 = ((i + 1)..k).map(|j| m[i][j] * b[j]).sum();
                b[i] = (m[i][k] - s) / m[i][i];
            }
            b
        };
        let mut b = solve(gram(&|r| y[r]));
        let resid: Vec<f64> = (0..y.len())
            .map(|r| y[r] - (0..k).map(|j| cols[j][r] * b[j]).sum::<f64>())
            .collect();
        let delta = solve(gram(&|r| resid[r]));
        for (bi, d) in b.iter_mut().zip(delta) {
            *bi += d;
        }
        b
    }

    #[test]
    fn intercept_only_is_sample_mean() {
        let x = DesignMatrix::from_columns(&[vec![1.0; 3]]).unwrap();
        let fit = ols_fit(&x, &[1.0, 2.0, 3.0]).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-14);
        assert!((fit.ssr - 2.0).abs() < 1e-14);
        assert!((fit.sigma2_hat - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exact_linear_target_has_zero_residuals() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|v| 3.0 - 0.5 * v).collect();
        let x = DesignMatrix::from_columns(&[vec![1.0; 10], t]).unwrap();
        let fit = ols_fit(&x, &y).unwrap();
        assert!(fit.ssr < 1e-25);
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((fit.coefficients[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn matches_normal_equations_on_random_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|j| {
                (0..20)
                    .map(|_| if j == 0 { 1.0 } else { rng.random_range(-2.0..2.0) })
                    .collect()
            })
            .collect();
        let y: Vec<f64> = (0..20).map(|_| rng.random_range(-5.0..5.0)).collect();
        let x = DesignMatrix::from_columns(&cols).unwrap();
        let fit = ols_fit(&x, &y).unwrap();
        let oracle = normal_equations_oracle(&cols, &y);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300), "{a} vs {b}");
        }
        // residuals orthogonal to every column
        for c in &cols {
            let ip: f64 = c.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            let scale = norm(c) * norm(&fit.residuals);
            assert!(ip.abs() <= 1e-6 * scale);
        }
        let ssr: f64 = fit.residuals.iter().map(|e| e * e).sum();
        assert!((ssr - fit.ssr).abs() <= 1e-10 * ssr);
    }

    #[test]
    fn leading_ssr_equals_restricted_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (x, target) = build_mean_design(&y).unwrap();
        let qr = QrDecomposition::new(&x).unwrap();
        let mut qty = target.clone();
        qr.apply_qt(&mut qty);
        let restricted =
            DesignMatrix::from_columns(&[x.column(0).to_vec(), x.column(1).to_vec()]).unwrap();
        let ssr0 = ols_fit(&restricted, &target).unwrap().ssr;
        let ssr1 = ols_fit(&x, &target).unwrap().ssr;
        assert!((QrDecomposition::ssr_leading(&qty, 2) - ssr0).abs() < 1e-10 * ssr0);
        assert!((QrDecomposition::ssr_leading(&qty, 4) - ssr1).abs() < 1e-10 * ssr1);
    }

    #[test]
    fn square_nonsingular_system_interpolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        // n = k + 1 rows; add the target as a combination plus one free row
        let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = DesignMatrix::from_columns(&cols).unwrap();
        let fit = ols_fit(&x, &y).unwrap();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        assert!(fit.ssr < yy);
        // exact interpolation when y lies in the column span
        let b = [0.3, -1.0, 2.0, 0.5];
        let y_in = x.mul_vec(&b);
        let fit = ols_fit(&x, &y_in).unwrap();
        let yy: f64 = y_in.iter().map(|v| v * v).sum();
        assert!(fit.ssr < 1e-16 * yy);
    }

    #[test]
    fn design_shapes() {
        let y = [1.0, 2.0, 0.5, 3.0, 2.5, 1.0, 0.0, 4.0];
        let (x, target) = build_mean_design(&y).unwrap();
        assert_eq!((x.rows(), x.cols()), (7, 4));
        assert_eq!(target, y[1..].to_vec());
        // row for t = 2: [1, y_1, 2/8, 2/8 * y_1]
        assert_eq!(x.get(0, 0), 1.0);
        assert_eq!(x.get(0, 1), 1.0);
        assert_eq!(x.get(0, 2), 0.25);
        assert_eq!(x.get(6, 2), 1.0);
        assert_eq!(x.get(6, 3), 0.0);
        assert!(matches!(
            build_mean_design(&y[..5]),
            Err(Error::InsufficientData { needed: 8, got: 5 })
        ));
    }

    #[test]
    fn constant_series_is_singular() {
        let (x, target) = build_mean_design(&[3.0; 20]).unwrap();
        assert!(matches!(ols_fit(&x, &target), Err(Error::SingularDesign { .. })));
        let (x, target) = build_variance_design(&[0.7; 20]).unwrap();
        assert!(matches!(ols_fit(&x, &target), Err(Error::SingularDesign { .. })));
        let (x, target) = build_variance_design(&[0.0; 20]).unwrap();
        assert!(matches!(ols_fit(&x, &target), Err(Error::SingularDesign { .. })));
    }

    #[test]
    fn variance_design_rejects_negative_input() {
        let mut u2 = vec![1.0; 10];
        u2[4] = -0.1;
        assert!(matches!(
            build_variance_design(&u2),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn variance_design_matches_scripted_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u2: Vec<f64> = (0..40).map(|_| rng.random::<f64>().powi(2) * 3.0).collect();
        let (x, target) = build_variance_design(&u2).unwrap();
        let n = u2.len();
        for (row, t) in (2..=n).enumerate() {
            let s = t as f64 / n as f64;
            let lag = u2[t - 2];
            assert_eq!(x.get(row, 0), 1.0);
            assert_eq!(x.get(row, 1), lag);
            assert_eq!(x.get(row, 2), s);
            assert_eq!(x.get(row, 3), s * lag);
            assert_eq!(target[row], u2[t - 1]);
        }
    }

    #[test]
    fn rejects_mismatched_target() {
        let x = DesignMatrix::from_columns(&[vec![1.0; 4]]).unwrap();
        assert!(matches!(
            ols_fit(&x, &[1.0, 2.0]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(DesignMatrix::from_columns(&[vec![1.0; 2], vec![1.0; 2]]).is_err());
    }
}

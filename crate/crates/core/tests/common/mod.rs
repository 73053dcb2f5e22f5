#![allow(dead_code)]

use std::path::Path;

use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct Frozen {
    pub statistic: f64,
    pub p_value: f64,
    #[serde(default)]
    pub df1: usize,
    #[serde(default)]
    pub df2: usize,
}

#[derive(Debug, Deserialize)]
pub struct Fixture {
    pub seed: u64,
    pub y: Vec<f64>,
    pub ma: Frozen,
    pub va: Frozen,
    pub tr2: Frozen,
}

pub fn fixtures() -> Vec<Fixture> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/oracle.json");
    let text = std::fs::read_to_string(&path).expect("fixture file");
    serde_json::from_str(&text).expect("fixture json")
}

/// SSR of `target` on `columns` through the normal equations, solved by
/// Gauss-Jordan elimination with partial pivoting and one refinement step.
pub fn brute_ssr(columns: &[Vec<f64>], target: &[f64]) -> f64 {
    let k = columns.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| dot(&columns[i], &columns[j])).collect())
        .collect();
    let solve = |rhs: Vec<f64>| -> Vec<f64> {
        let mut a: Vec<Vec<f64>> = gram.iter().cloned().zip(rhs).map(|(mut r, b)| {
            r.push(b);
            r
        }).collect();
        for c in 0..k {
            let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            for r in 0..k {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for j in c..=k {
                        a[r][j] -= f * a[c][j];
                    }
                }
            }
        }
        (0..k).map(|i| a[i][k] / a[i][i]).collect()
    };
    let resid = |b: &[f64]| -> Vec<f64> {
        (0..target.len())
            .map(|t| target[t] - (0..k).map(|j| columns[j][t] * b[j]).sum::<f64>())
            .collect()
    };
    let mut b = solve(columns.iter().map(|c| dot(c, target)).collect());
    let r = resid(&b);
    let delta = solve(columns.iter().map(|c| dot(c, &r)).collect());
    for (bj, dj) in b.iter_mut().zip(delta) {
        *bj += dj;
    }
    let r = resid(&b);
    dot(&r, &r)
}

/// `[1, x_{t-1}, t * scale, t * scale * x_{t-1}]` for `t = 2..=n`, and `x_t`.
pub fn lag_trend_columns(x: &[f64], scale: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = x.len();
    let lag = &x[..n - 1];
    let trend: Vec<f64> = (2..=n).map(|t| t as f64 * scale).collect();
    let cross = trend.iter().zip(lag).map(|(s, l)| s * l).collect();
    (vec![vec![1.0; n - 1], lag.to_vec(), trend, cross], x[1..].to_vec())
}

pub struct BruteStats {
    pub ma: f64,
    pub va: f64,
    pub tr2: f64,
}

pub fn brute_force(y: &[f64], trend_scale: f64) -> BruteStats {
    let f = |cols: &[Vec<f64>], target: &[f64], keep: usize| {
        let s1 = brute_ssr(cols, target);
        let s0 = brute_ssr(&cols[..keep], target);
        let q = (cols.len() - keep) as f64;
        let df2 = (target.len() - cols.len()) as f64;
        (((s0 - s1) / q) / (s1 / df2), s0, s1)
    };
    let (cols, target) = lag_trend_columns(y, trend_scale);
    let (ma, _, _) = f(&cols, &target, 2);

    let n = y.len();
    let ar = vec![vec![1.0; n - 1], y[..n - 1].to_vec()];
    let ar_target = &y[1..];
    let ar_fit = ar1_residuals(&ar, ar_target);
    let u2: Vec<f64> = ar_fit.iter().map(|e| e * e).collect();
    let (vcols, vtarget) = lag_trend_columns(&u2, trend_scale);
    let (va, s0, s1) = f(&vcols, &vtarget, 1);
    BruteStats {
        ma,
        va,
        tr2: vtarget.len() as f64 * (1.0 - s1 / s0),
    }
}

/// Residuals of a two-column fit from the closed-form simple regression.
fn ar1_residuals(cols: &[Vec<f64>], target: &[f64]) -> Vec<f64> {
    let x = &cols[1];
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = target.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(target).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    x.iter().zip(target).map(|(a, b)| b - icept - slope * a).collect()
}

/// Kolmogorov-Smirnov distance of a sample from Uniform[0, 1].
pub fn ks_uniform(mut p: Vec<f64>) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
        .fold(0.0, f64::max)
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

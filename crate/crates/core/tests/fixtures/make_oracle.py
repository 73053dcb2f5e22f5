"""Regenerates oracle.json: seeded series plus statistics from two separate
least squares fits (restricted and unrestricted) per test."""

import json

import numpy as np
from scipy import stats


def ar_arch(rng, n, beta, a0, b0, burn=100):
    y = np.zeros(n + burn)
    u_prev = 0.0
    for t in range(1, n + burn):
        h2 = a0 + b0 * u_prev**2
        u = np.sqrt(h2) * rng.standard_normal()
        y[t] = 1.0 + beta * y[t - 1] + u
        u_prev = u
    return y[burn:]


def ssr(x, y):
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    r = y - x @ coef
    return float(r @ r), r


def lag_trend(x):
    n = len(x)
    t = np.arange(2, n + 1) / n
    lag = x[:-1]
    return np.column_stack([np.ones(n - 1), lag, t, t * lag]), x[1:]


def f_stat(x, target, keep):
    s1, _ = ssr(x, target)
    s0, _ = ssr(x[:, :keep], target)
    q = x.shape[1] - keep
    df2 = len(target) - x.shape[1]
    return ((s0 - s1) / q) / (s1 / df2), q, df2


def main():
    cases = [(80, 0.3, 1.0, 0.0), (120, 0.9, 1.0, 0.0), (200, 0.3, 1.0, 0.3),
             (60, 0.5, 1.0, 0.6), (300, 0.3, 1.0, 0.9), (150, -0.4, 2.0, 0.2),
             (100, 0.0, 0.5, 0.0), (250, 0.7, 1.0, 0.5), (400, 0.3, 1.0, 0.1),
             (90, 0.95, 1.0, 0.3)]
    out = []
    for seed, (n, beta, a0, b0) in enumerate(cases):
        rng = np.random.default_rng(1000 + seed)
        y = ar_arch(rng, n, beta, a0, b0)
        x, target = lag_trend(y)
        ma, ma_q, ma_df2 = f_stat(x, target, 2)
        ar = np.column_stack([np.ones(n - 1), y[:-1]])
        _, resid = ssr(ar, y[1:])
        u2 = resid**2
        xv, tv = lag_trend(u2)
        va, va_q, va_df2 = f_stat(xv, tv, 1)
        s1, _ = ssr(xv, tv)
        tss = float(((tv - tv.mean()) ** 2).sum())
        tr2 = len(tv) * (1.0 - s1 / tss)
        out.append({
            "seed": seed,
            "y": y.tolist(),
            "ma": {"statistic": ma, "df1": ma_q, "df2": ma_df2,
                   "p_value": float(stats.f.sf(ma, ma_q, ma_df2))},
            "va": {"statistic": va, "df1": va_q, "df2": va_df2,
                   "p_value": float(stats.f.sf(va, va_q, va_df2))},
            "tr2": {"statistic": tr2, "p_value": float(stats.chi2.sf(tr2, 3))},
        })
    with open("oracle.json", "w") as fh:
        json.dump(out, fh, indent=1)


if __name__ == "__main__":
    main()

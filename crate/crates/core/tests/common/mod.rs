//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use chrono::NaiveDate;
use hodl_core::BasketPanel;
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Standard normal draw (Box-Muller).
pub fn normal(r: &mut StdRng) -> f64 {
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn normal_matrix(r: &mut StdRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(r))
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// A panel where every coin is valid on every day.
pub fn all_valid_panel(name: &str, coins: usize, days: usize, seed: u64) -> BasketPanel {
    let mut r = rng(seed);
    let mut high = Vec::new();
    let mut low = Vec::new();
    for _ in 0..coins {
        let mut level: f64 = 10.0 + 90.0 * r.random::<f64>();
        let mut h = Vec::with_capacity(days);
        let mut l = Vec::with_capacity(days);
        for _ in 0..days {
            level *= (0.03 * normal(&mut r)).exp();
            let lo = level * (1.0 - 0.05 * r.random::<f64>());
            l.push(lo);
            h.push(lo * (1.0 + 0.1 * r.random::<f64>()));
        }
        high.push(h);
        low.push(l);
    }
    let symbols = (0..coins).map(|i| format!("C{i}")).collect();
    BasketPanel::from_columns(name, date(2019, 1, 7), symbols, high, low).unwrap()
}

/// Quantile by linear interpolation between order statistics at `(n-1)p`,
/// on an insertion-sorted copy.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut s: Vec<f64> = Vec::with_capacity(xs.len());
    for &x in xs {
        let pos = s.iter().position(|v| *v > x).unwrap_or(s.len());
        s.insert(pos, x);
    }
    let pos = p * (s.len() - 1) as f64;
    let i = pos as usize;
    if i + 1 >= s.len() {
        return s[s.len() - 1];
    }
    let f = pos - i as f64;
    s[i] + f * (s[i + 1] - s[i])
}

#[derive(Debug, Clone)]
pub struct OracleMetrics {
    pub mean: f64,
    pub median: f64,
    pub std: Option<f64>,
    pub iqr: f64,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub var: f64,
    pub cvar: f64,
    pub p_profit: f64,
    pub p_sig_loss: f64,
    pub q75: f64,
    pub top25_mean: f64,
    pub top25_prop: f64,
    pub skew_g1: Option<f64>,
    pub kurt_g2: Option<f64>,
}

fn plain_mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

fn plain_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = plain_mean(xs);
    let mut ss = 0.0;
    for x in xs {
        ss += (x - m).powi(2);
    }
    Some((ss / (xs.len() as f64 - 1.0)).sqrt())
}

/// Brute-force statistic suite, written from the definitions with explicit loops.
pub fn oracle_metrics(xs: &[f64], alpha: f64, with_moments: bool) -> OracleMetrics {
    let n = xs.len() as f64;
    let mean = plain_mean(xs);
    let std = plain_sd(xs);
    let q25 = quantile(xs, 0.25);
    let q75 = quantile(xs, 0.75);
    let qa = quantile(xs, alpha);
    let tail: Vec<f64> = xs.iter().copied().filter(|x| *x <= qa).collect();
    let neg: Vec<f64> = xs.iter().copied().filter(|x| *x < 0.0).collect();
    let top: Vec<f64> = xs.iter().copied().filter(|x| *x >= q75).collect();
    let pos = |s: Option<f64>| s.filter(|v| *v > 0.0);
    let (skew_g1, kurt_g2) = if with_moments && xs.len() >= 4 {
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        if m2 > 0.0 {
            let g1 = m3 / m2.powf(1.5);
            let g2 = m4 / (m2 * m2) - 3.0;
            (
                Some(g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)),
                Some((n - 1.0) / ((n - 2.0) * (n - 3.0)) * ((n + 1.0) * g2 + 6.0)),
            )
        } else {
            (None, None)
        }
    } else {
        (None, None)
    };
    OracleMetrics {
        mean,
        median: quantile(xs, 0.5),
        std,
        iqr: q75 - q25,
        sharpe: pos(std).map(|s| mean / s),
        sortino: pos(plain_sd(&neg)).map(|s| mean / s),
        var: f64::max(-qa, 0.0),
        cvar: f64::max(-plain_mean(&tail), 0.0),
        p_profit: xs.iter().filter(|x| **x > 0.0).count() as f64 / n,
        p_sig_loss: xs.iter().filter(|x| **x < -0.10).count() as f64 / n,
        q75,
        top25_mean: plain_mean(&top),
        top25_prop: top.len() as f64 / n,
        skew_g1,
        kurt_g2,
    }
}

/// Elastic-net objective evaluated directly from the data.
pub fn enet_objective(x: &DMatrix<f64>, y: &DMatrix<f64>, b: &DMatrix<f64>, alpha: f64) -> f64 {
    let t = x.nrows() as f64;
    let r = y - x * b;
    let rows: f64 = (0..b.nrows()).map(|j| b.row(j).norm()).sum();
    r.norm_squared() / (2.0 * t) + alpha * (0.25 * b.norm_squared() + 0.5 * rows)
}

/// Accelerated proximal gradient with adaptive restart, run to stagnation.
pub fn fista_enet(x: &DMatrix<f64>, y: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    let t = x.nrows() as f64;
    let (p, m) = (x.ncols(), y.ncols());
    let g = x.transpose() * x / t;
    let c = x.transpose() * y / t;
    let lip = g.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max) + alpha / 2.0;
    let step = 1.0 / lip;
    let prox = |v: DMatrix<f64>| {
        let mut out = v;
        for j in 0..p {
            let nrm = out.row(j).norm();
            let shrink = if nrm > 0.0 { (1.0 - step * alpha / 2.0 / nrm).max(0.0) } else { 0.0 };
            for k in 0..m {
                out[(j, k)] *= shrink;
            }
        }
        out
    };
    let grad = |b: &DMatrix<f64>| &g * b - &c + b * (alpha / 2.0);
    let mut b = DMatrix::zeros(p, m);
    let mut z = b.clone();
    let mut mom = 1.0_f64;
    let mut best = enet_objective(x, y, &b, alpha);
    let mut stale = 0;
    for _ in 0..2_000_000 {
        let next = prox(&z - grad(&z) * step);
        let f = enet_objective(x, y, &next, alpha);
        if f > best {
            // Restart momentum when the objective goes up.
            mom = 1.0;
            z = b.clone();
            continue;
        }
        let mom_next = (1.0 + (1.0 + 4.0 * mom * mom).sqrt()) / 2.0;
        z = &next + (&next - &b) * ((mom - 1.0) / mom_next);
        let improvement = best - f;
        b = next;
        best = f;
        mom = mom_next;
        if improvement <= 1e-17 * best.abs().max(1e-300) {
            stale += 1;
            if stale > 50 {
                break;
            }
        } else {
            stale = 0;
        }
    }
    b
}

/// `(-1)^k C(1/2, k)` from the closed form `-C(2k, k) / (4^k (2k - 1))`,
/// with the central binomial coefficient computed exactly in integers
/// (log-gamma beyond `k = 60`).
pub fn half_diff_weight(k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > 60 {
        use statrs::function::gamma::ln_gamma;
        let kf = f64::from(k);
        let ln_central = ln_gamma(2.0 * kf + 1.0) - 2.0 * ln_gamma(kf + 1.0);
        return -(ln_central - kf * 4f64.ln()).exp() / (2.0 * kf - 1.0);
    }
    let mut central: u128 = 1;
    for i in 0..u128::from(k) {
        central = central * (2 * u128::from(k) - i) / (i + 1);
    }
    -(central as f64) / (4f64.powi(k as i32) * (2.0 * f64::from(k) - 1.0))
}

/// Relative closeness with an absolute floor of `tol * scale`.
pub fn close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(scale)
}

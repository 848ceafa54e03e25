//! Local projections: per-horizon OLS with HC1 errors, RW1 smoothing across
//! horizons, stationary-bootstrap k-max simultaneous bands, and effect
//! ranking and comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureId, FeatureTensor};
use crate::metrics::quantile_sorted;
use crate::rng::{CounterRng, StreamKey};

pub const SE_FLOOR: f64 = 1e-8;
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// `(P + 1) x m`, intercept first.
    pub beta: DMatrix<f64>,
    pub se: DMatrix<f64>,
    pub ridge: bool,
}

/// OLS with intercept for each response column, with HC1 standard errors
/// `n / (n - P - 1) * A X' diag(e^2) X A`, `A = (X'X)^-1`. A rank-deficient
/// design gets a `1e-8` ridge on `X'X` and is flagged.
pub fn ols_hc1(z: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<OlsFit> {
    let (n, p) = z.shape();
    if y.nrows() != n {
        return Err(Error::InvalidInput(format!("design has {n} rows, response {}", y.nrows())));
    }
    if n <= p + 1 {
        return Err(Error::InsufficientHistory(format!("{n} rows for {} coefficients", p + 1)));
    }
    let mut x = DMatrix::from_element(n, p + 1, 1.0);
    x.columns_mut(1, p).copy_from(z);
    let mut xtx = x.tr_mul(&x);
    let mut ridge = match xtx.clone().cholesky() {
        Some(ch) => {
            let d = ch.l_dirty().diagonal();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
            lo <= 0.0 || (lo / hi).powi(2) < 1e-14
        }
        None => true,
    };
    if ridge {
        for i in 0..=p {
            xtx[(i, i)] += RIDGE;
        }
    }
    let a = match xtx.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => {
            ridge = true;
            xtx.try_inverse().ok_or_else(|| Error::Numerical("singular design".into()))?
        }
    };
    let beta = &a * x.tr_mul(y);
    let resid = y - &x * &beta;
    let scale = n as f64 / (n - p - 1) as f64;
    let mut se = DMatrix::zeros(p + 1, y.ncols());
    for k in 0..y.ncols() {
        let mut xe = x.clone();
        for (t, mut row) in xe.row_iter_mut().enumerate() {
            row *= resid[(t, k)];
        }
        let meat = xe.tr_mul(&xe);
        let cov = &a * meat * &a * scale;
        for i in 0..=p {
            se[(i, k)] = cov[(i, i)].max(0.0).sqrt();
        }
    }
    Ok(OlsFit { beta, se, ridge })
}

/// Weekly positions `ceil(h / 7)` of the horizons.
pub fn weekly_positions(horizons: &[u32]) -> Vec<f64> {
    horizons.iter().map(|h| f64::from(h.div_ceil(7))).collect()
}

/// Gaps between consecutive weekly positions.
pub fn spacings(horizons: &[u32]) -> Vec<f64> {
    weekly_positions(horizons).windows(2).map(|w| w[1] - w[0]).collect()
}

/// Solves a tridiagonal system in place (Thomas algorithm). `lower[i]`
/// couples rows `i + 1` and `i`; `upper[i]` couples rows `i` and `i + 1`.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if n > 1 {
        c[0] = upper[0] / denom;
    }
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = upper[i] / denom;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

/// RW1 smoother as a linear map: returns `S` with `b = S beta_hat`, where
/// `b` minimizes `sum (b_j - beta_j)^2 / s_j^2 + lambda sum (b_{j+1} - b_j)^2 / delta_j`.
pub fn rw1_matrix(se: &[f64], delta: &[f64], lambda: f64) -> DMatrix<f64> {
    let h = se.len();
    let w: Vec<f64> = se.iter().map(|s| 1.0 / s.max(SE_FLOOR).powi(2)).collect();
    let mut diag = w.clone();
    let mut off = vec![0.0; h.saturating_sub(1)];
    for j in 0..h.saturating_sub(1) {
        let k = lambda / delta[j];
        diag[j] += k;
        diag[j + 1] += k;
        off[j] = -k;
    }
    let mut s = DMatrix::zeros(h, h);
    for i in 0..h {
        let mut e = vec![0.0; h];
        e[i] = w[i];
        let col = solve_tridiagonal(&off, &diag, &off, &e);
        s.set_column(i, &DVector::from_vec(col));
    }
    s
}

/// Smoothed path and its standard errors from `diag(S diag(s^2) S')`.
pub fn rw1_smooth(beta: &[f64], se: &[f64], delta: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let h = beta.len();
    if h == 0 {
        return (Vec::new(), Vec::new());
    }
    let se: Vec<f64> = se.iter().map(|s| s.max(SE_FLOOR)).collect();
    let s = rw1_matrix(&se, delta, lambda);
    let b = &s * DVector::from_column_slice(beta);
    let se_out = (0..h)
        .map(|i| (0..h).map(|j| (s[(i, j)] * se[j]).powi(2)).sum::<f64>().sqrt())
        .collect();
    (b.iter().copied().collect(), se_out)
}

/// Median of the weekly positions (mean of the middle two for an even count).
pub fn median_weeks(horizons: &[u32]) -> f64 {
    let mut w = weekly_positions(horizons);
    w.sort_by(f64::total_cmp);
    if w.is_empty() {
        return 0.0;
    }
    let n = w.len();
    if n % 2 == 1 {
        w[n / 2]
    } else {
        0.5 * (w[n / 2 - 1] + w[n / 2])
    }
}

/// `max{2, min(T - 1, max(1.75 T^(1/3), L_med))}`.
pub fn mean_block_length(t: usize, l_med: f64) -> f64 {
    let t = t as f64;
    (1.75 * t.cbrt()).max(l_med).min(t - 1.0).max(2.0)
}

/// Stationary bootstrap: uniform start, continue to the next index (wrapping)
/// with probability `1 - 1/L`, restart uniformly otherwise.
pub fn stationary_bootstrap_indices(t: usize, mean_block: f64, rng: &mut CounterRng) -> Vec<usize> {
    if t == 0 {
        return Vec::new();
    }
    let p = 1.0 / mean_block;
    let mut out = Vec::with_capacity(t);
    let mut cur = rng.index(t);
    out.push(cur);
    while out.len() < t {
        cur = if rng.next_f64() < p { rng.index(t) } else { (cur + 1) % t };
        out.push(cur);
    }
    out
}

/// `min(2, H)`.
pub fn k_max(h: usize) -> usize {
    h.min(2)
}

/// `k`-th largest absolute value (1-based `k`).
pub fn kth_largest_abs(values: &[f64], k: usize) -> f64 {
    let mut a: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    a[k - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpConfig {
    pub lambda: f64,
    pub replicates: usize,
    pub level: f64,
}

impl Default for LpConfig {
    fn default() -> Self {
        LpConfig {
            lambda: 1.0,
            replicates: 1000,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfPoint {
    pub predictor: String,
    pub target: String,
    pub horizon: u32,
    pub beta_raw: f64,
    pub se_raw: f64,
    pub beta_rw1: f64,
    pub se_rw1: f64,
    pub crit: f64,
    /// Native units: `beta_rw1 * sigma_{h,k}`.
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandFamily {
    pub predictor: String,
    pub target: String,
    pub crit: f64,
    pub valid_replicates: usize,
    pub dropped_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfSurface {
    pub basket: String,
    pub horizons: Vec<u32>,
    pub points: Vec<IrfPoint>,
    pub families: Vec<BandFamily>,
    pub mean_block: f64,
    pub ridge_replicates: usize,
    /// `[horizon][target]`, raw intercepts (never smoothed).
    pub intercepts: Vec<Vec<f64>>,
}

impl IrfSurface {
    pub fn point(&self, predictor: &str, target: &str, horizon: u32) -> Option<&IrfPoint> {
        self.points
            .iter()
            .find(|p| p.predictor == predictor && p.target == target && p.horizon == horizon)
    }
}

/// Per-horizon regression inputs: `z[h]` is `n x P`, `y[h]` is `n x m`.
#[derive(Debug, Clone)]
pub struct LpDesign {
    pub basket: String,
    pub horizons: Vec<u32>,
    pub predictors: Vec<String>,
    pub targets: Vec<String>,
    pub z: Vec<DMatrix<f64>>,
    pub y: Vec<DMatrix<f64>>,
    /// `[horizon][target]` native-unit scales.
    pub scales: Vec<Vec<f64>>,
}

/// Slopes and errors indexed `[h][p][k]`.
type Paths = (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>, bool);

fn fit_paths(design: &LpDesign, rows: Option<&[usize]>) -> Result<Paths> {
    let mut beta = Vec::new();
    let mut se = Vec::new();
    let mut ridge = false;
    for (z, y) in design.z.iter().zip(&design.y) {
        let fit = match rows {
            None => ols_hc1(z, y)?,
            Some(r) => ols_hc1(&z.select_rows(r.iter()), &y.select_rows(r.iter()))?,
        };
        ridge |= fit.ridge;
        let p = z.ncols();
        let m = y.ncols();
        beta.push((0..p).map(|i| (0..m).map(|k| fit.beta[(i + 1, k)]).collect()).collect());
        se.push((0..p).map(|i| (0..m).map(|k| fit.se[(i + 1, k)]).collect()).collect());
    }
    Ok((beta, se, ridge))
}

/// Smoothed paths `[p][k] -> (b, s)` across horizons.
fn smooth_all(beta: &[Vec<Vec<f64>>], se: &[Vec<Vec<f64>>], delta: &[f64], lambda: f64) -> Vec<Vec<(Vec<f64>, Vec<f64>)>> {
    let p = beta[0].len();
    let m = beta[0].first().map_or(0, Vec::len);
    (0..p)
        .map(|i| {
            (0..m)
                .map(|k| {
                    let b: Vec<f64> = beta.iter().map(|bh| bh[i][k]).collect();
                    let s: Vec<f64> = se.iter().map(|sh| sh[i][k]).collect();
                    rw1_smooth(&b, &s, delta, lambda)
                })
                .collect()
        })
        .collect()
}

/// Full LP pipeline on a prepared design.
pub fn lp_surface(design: &LpDesign, cfg: &LpConfig, key: StreamKey) -> Result<IrfSurface> {
    let hn = design.horizons.len();
    if hn == 0 || design.z.len() != hn || design.y.len() != hn {
        return Err(Error::InvalidInput("LP design needs one matrix pair per horizon".into()));
    }
    if design.predictors.is_empty() {
        return Err(Error::InvalidInput("LP design has no predictors".into()));
    }
    let n = design.z[0].nrows();
    let delta = spacings(&design.horizons);
    let (beta, se, _) = fit_paths(design, None)?;
    let smooth = smooth_all(&beta, &se, &delta, cfg.lambda);
    let kmax = k_max(hn);
    let mean_block = mean_block_length(n, median_weeks(&design.horizons));

    let reps: Vec<Option<(Vec<Vec<f64>>, bool)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let idx = stationary_bootstrap_indices(n, mean_block, &mut key.child(r as u64).rng());
            let (bb, sb, ridge) = fit_paths(design, Some(&idx)).ok()?;
            let sm = smooth_all(&bb, &sb, &delta, cfg.lambda);
            let stats = sm
                .iter()
                .enumerate()
                .map(|(i, per_k)| {
                    per_k
                        .iter()
                        .enumerate()
                        .map(|(k, (b, s))| {
                            let t: Vec<f64> = (0..hn).map(|h| (b[h] - smooth[i][k].0[h]) / s[h]).collect();
                            if t.iter().all(|v| v.is_finite()) {
                                kth_largest_abs(&t, kmax)
                            } else {
                                f64::NAN
                            }
                        })
                        .collect()
                })
                .collect();
            Some((stats, ridge))
        })
        .collect();
    let ridge_replicates = reps.iter().flatten().filter(|(_, r)| *r).count();

    let mut points = Vec::new();
    let mut families = Vec::new();
    for (i, pname) in design.predictors.iter().enumerate() {
        for (k, tname) in design.targets.iter().enumerate() {
            let mut m: Vec<f64> = reps
                .iter()
                .flatten()
                .map(|(s, _)| s[i][k])
                .filter(|v| v.is_finite())
                .collect();
            let dropped = cfg.replicates - m.len();
            if m.is_empty() {
                return Err(Error::Numerical(format!("no valid bootstrap replicates for {pname} -> {tname}")));
            }
            if dropped > 0 {
                warn!("{pname} -> {tname}: dropped {dropped} non-finite bootstrap replicates");
            }
            m.sort_by(f64::total_cmp);
            let crit = quantile_sorted(&m, cfg.level);
            families.push(BandFamily {
                predictor: pname.clone(),
                target: tname.clone(),
                crit,
                valid_replicates: m.len(),
                dropped_replicates: dropped,
            });
            let (b, s) = &smooth[i][k];
            for (j, h) in design.horizons.iter().enumerate() {
                let sigma = design.scales[j][k];
                let lo = (b[j] - crit * s[j]) * sigma;
                let hi = (b[j] + crit * s[j]) * sigma;
                points.push(IrfPoint {
                    predictor: pname.clone(),
                    target: tname.clone(),
                    horizon: *h,
                    beta_raw: beta[j][i][k],
                    se_raw: se[j][i][k],
                    beta_rw1: b[j],
                    se_rw1: s[j],
                    crit,
                    estimate: b[j] * sigma,
                    lo,
                    hi,
                    significant: lo > 0.0 || hi < 0.0,
                });
            }
        }
    }
    let intercepts = design
        .z
        .iter()
        .zip(&design.y)
        .map(|(z, y)| {
            let fit = ols_hc1(z, y)?;
            Ok((0..y.ncols()).map(|k| fit.beta[(0, k)]).collect())
        })
        .collect::<Result<_>>()?;
    Ok(IrfSurface {
        basket: design.basket.clone(),
        horizons: design.horizons.clone(),
        points,
        families,
        mean_block,
        ridge_replicates,
        intercepts,
    })
}

/// Builds the LP design from a basket tensor: predictors are the current
/// targets followed by the selected macro features; responses are the
/// future targets over the training rows.
pub fn design_from_tensor(tensor: &FeatureTensor, selected: &[FeatureId]) -> Result<LpDesign> {
    let meta = &tensor.meta;
    let mut cols = Vec::new();
    for f in selected {
        let j = meta
            .features
            .iter()
            .position(|g| g == f)
            .ok_or_else(|| Error::InvalidInput(format!("feature {} is not in the tensor", f.name())))?;
        cols.push(j);
    }
    if selected.is_empty() {
        warn!("basket {}: no selected macro features, using endogenous predictors only", meta.basket);
    }
    let ts = meta.t_star;
    let mut z = Vec::new();
    let mut y = Vec::new();
    for i in 0..meta.horizons.len() {
        let ny = tensor.y_current[i].ncols();
        let mut zh = DMatrix::zeros(ts, ny + cols.len());
        zh.columns_mut(0, ny).copy_from(&tensor.y_current[i].rows(0, ts));
        for (c, j) in cols.iter().enumerate() {
            zh.set_column(ny + c, &tensor.x_macro[i].column(*j).rows(0, ts));
        }
        z.push(zh);
        y.push(tensor.y_future[i].clone());
    }
    let mut predictors: Vec<String> = meta.targets.iter().map(|t| t.name().to_string()).collect();
    predictors.extend(selected.iter().map(FeatureId::name));
    Ok(LpDesign {
        basket: meta.basket.clone(),
        horizons: meta.horizons.clone(),
        predictors,
        targets: meta.targets.iter().map(|t| t.name().to_string()).collect(),
        z,
        y,
        scales: meta.ref_scale_y.clone(),
    })
}

pub fn estimate_surface(tensor: &FeatureTensor, selected: &[FeatureId], cfg: &LpConfig, seed: u64) -> Result<IrfSurface> {
    let design = design_from_tensor(tensor, selected)?;
    lp_surface(&design, cfg, StreamKey::new(seed).child_str(&tensor.meta.basket))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEffect {
    pub basket: String,
    pub predictor: String,
    pub target: String,
    pub horizon: u32,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossBasketRank {
    pub predictor: String,
    pub baskets: usize,
    pub mean_abs: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonTargetRanking {
    pub horizon: u32,
    pub target: String,
    pub ranked: Vec<CrossBasketRank>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rankings {
    /// Per basket and horizon, the largest significant effects.
    pub top_effects: Vec<(String, u32, Vec<RankedEffect>)>,
    pub cross_basket: Vec<HorizonTargetRanking>,
}

pub const TOP_EFFECTS: usize = 8;
pub const TOP_CROSS: usize = 4;

/// Top significant effects per (basket, horizon) by absolute size, and per
/// (horizon, target) the predictors significant in the most baskets, with
/// ties broken by mean then max absolute effect over those baskets.
pub fn rank_effects(surfaces: &[IrfSurface]) -> Rankings {
    let mut top_effects = Vec::new();
    for s in surfaces {
        let mut by_h: BTreeMap<u32, Vec<RankedEffect>> = BTreeMap::new();
        for p in s.points.iter().filter(|p| p.significant) {
            by_h.entry(p.horizon).or_default().push(RankedEffect {
                basket: s.basket.clone(),
                predictor: p.predictor.clone(),
                target: p.target.clone(),
                horizon: p.horizon,
                estimate: p.estimate,
            });
        }
        for (h, mut v) in by_h {
            v.sort_by(|a, b| {
                b.estimate
                    .abs()
                    .total_cmp(&a.estimate.abs())
                    .then_with(|| a.predictor.cmp(&b.predictor))
                    .then_with(|| a.target.cmp(&b.target))
            });
            v.truncate(TOP_EFFECTS);
            top_effects.push((s.basket.clone(), h, v));
        }
    }

    let mut groups: BTreeMap<(u32, String), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for s in surfaces {
        for p in s.points.iter().filter(|p| p.significant) {
            groups
                .entry((p.horizon, p.target.clone()))
                .or_default()
                .entry(p.predictor.clone())
                .or_default()
                .push(p.estimate.abs());
        }
    }
    let cross_basket = groups
        .into_iter()
        .map(|((horizon, target), preds)| {
            let mut ranked: Vec<CrossBasketRank> = preds
                .into_iter()
                .map(|(predictor, effs)| CrossBasketRank {
                    predictor,
                    baskets: effs.len(),
                    mean_abs: effs.iter().sum::<f64>() / effs.len() as f64,
                    max_abs: effs.iter().copied().fold(0.0, f64::max),
                })
                .collect();
            ranked.sort_by(|a, b| {
                b.baskets
                    .cmp(&a.baskets)
                    .then_with(|| b.mean_abs.total_cmp(&a.mean_abs))
                    .then_with(|| b.max_abs.total_cmp(&a.max_abs))
                    .then_with(|| a.predictor.cmp(&b.predictor))
            });
            ranked.truncate(TOP_CROSS);
            HorizonTargetRanking { horizon, target, ranked }
        })
        .collect();
    Rankings {
        top_effects,
        cross_basket,
    }
}

/// One comparable surface cell in native units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub basket: String,
    pub predictor: String,
    pub target: String,
    pub horizon: u32,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub significant: bool,
}

pub fn surface_rows(surfaces: &[IrfSurface]) -> Vec<SurfaceRow> {
    surfaces
        .iter()
        .flat_map(|s| {
            s.points.iter().map(move |p| SurfaceRow {
                basket: s.basket.clone(),
                predictor: p.predictor.clone(),
                target: p.target.clone(),
                horizon: p.horizon,
                estimate: p.estimate,
                lo: p.lo,
                hi: p.hi,
                significant: p.significant,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub samples: usize,
    /// Over keys where neither estimate is exactly zero.
    pub sign_match: Option<f64>,
    pub overlap: f64,
    pub significant_a: f64,
    pub significant_b: f64,
    pub sign_match_given_a_significant: Option<f64>,
    pub sign_match_given_both_significant: Option<f64>,
}

type RowKey = (String, String, String, u32);

fn key_of(r: &SurfaceRow) -> RowKey {
    (r.basket.clone(), r.predictor.clone(), r.target.clone(), r.horizon)
}

/// Agreement between two surfaces on identical (basket, predictor, target, horizon) keys.
pub fn compare_surfaces(a: &[SurfaceRow], b: &[SurfaceRow]) -> Result<AgreementSummary> {
    let ma: BTreeMap<RowKey, &SurfaceRow> = a.iter().map(|r| (key_of(r), r)).collect();
    let mb: BTreeMap<RowKey, &SurfaceRow> = b.iter().map(|r| (key_of(r), r)).collect();
    if ma.len() != a.len() || mb.len() != b.len() {
        return Err(Error::InvalidInput("surface has duplicate keys".into()));
    }
    let ka: BTreeSet<&RowKey> = ma.keys().collect();
    let kb: BTreeSet<&RowKey> = mb.keys().collect();
    if ka != kb {
        let missing: Vec<String> = ka
            .symmetric_difference(&kb)
            .take(5)
            .map(|k| format!("{}/{}/{}/{}", k.0, k.1, k.2, k.3))
            .collect();
        return Err(Error::InvalidInput(format!("surface keys differ, e.g. {}", missing.join(", "))));
    }
    if ma.is_empty() {
        return Err(Error::InvalidInput("surfaces are empty".into()));
    }
    let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let (mut signed, mut matched, mut overlap, mut sa, mut sb) = (0, 0, 0, 0, 0);
    let (mut a_sig_den, mut a_sig_num, mut both_den, mut both_num) = (0, 0, 0, 0);
    for (k, ra) in &ma {
        let rb = mb[k];
        let nonzero = ra.estimate != 0.0 && rb.estimate != 0.0;
        let same = ra.estimate.signum() == rb.estimate.signum();
        if nonzero {
            signed += 1;
            matched += usize::from(same);
            if ra.significant {
                a_sig_den += 1;
                a_sig_num += usize::from(same);
            }
            if ra.significant && rb.significant {
                both_den += 1;
                both_num += usize::from(same);
            }
        }
        overlap += usize::from(ra.lo.max(rb.lo) <= ra.hi.min(rb.hi));
        sa += usize::from(ra.significant);
        sb += usize::from(rb.significant);
    }
    let n = ma.len();
    Ok(AgreementSummary {
        samples: n,
        sign_match: rate(matched, signed),
        overlap: overlap as f64 / n as f64,
        significant_a: sa as f64 / n as f64,
        significant_b: sb as f64 / n as f64,
        sign_match_given_a_significant: rate(a_sig_num, a_sig_den),
        sign_match_given_both_significant: rate(both_num, both_den),
    })
}

pub const SURFACE_COLUMNS: [&str; 8] = ["basket", "predictor", "target", "horizon", "estimate", "lo", "hi", "significant"];

pub fn write_surface_csv(path: &Path, rows: &[SurfaceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(SURFACE_COLUMNS).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.write_record([
            r.basket.clone(),
            r.predictor.clone(),
            r.target.clone(),
            r.horizon.to_string(),
            r.estimate.to_string(),
            r.lo.to_string(),
            r.hi.to_string(),
            r.significant.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_surface_csv(path: &Path) -> Result<Vec<SurfaceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = || Error::Data(format!("{}: malformed row {}", path.display(), i + 1));
        let f = |j: usize| rec.get(j).and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(bad);
        let sig = match rec.get(7).map(|s| s.trim().to_ascii_lowercase()) {
            Some(s) if s == "true" || s == "1" => true,
            Some(s) if s == "false" || s == "0" => false,
            _ => return Err(bad()),
        };
        out.push(SurfaceRow {
            basket: rec.get(0).ok_or_else(bad)?.to_string(),
            predictor: rec.get(1).ok_or_else(bad)?.to_string(),
            target: rec.get(2).ok_or_else(bad)?.to_string(),
            horizon: rec.get(3).and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?,
            estimate: f(4)?,
            lo: f(5)?,
            hi: f(6)?,
            significant: sig,
        });
    }
    Ok(out)
}

//! Purged cross-validation, multitask elastic net and block-bootstrap
//! stability selection of macro features.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{gap_weeks, Family, FeatureId, FeatureTensor};
use crate::rng::{CounterRng, StreamKey};

pub const SELECTION_EPS: f64 = 1e-12;
pub const FALLBACK_ALPHA: f64 = 0.1;

/// One chronological fold. Indices are 0-based and half-open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurgedSplit {
    pub fold: usize,
    pub train_end: usize,
    pub test_start: usize,
    pub test_end: usize,
}

impl PurgedSplit {
    pub fn train(&self) -> std::ops::Range<usize> {
        0..self.train_end
    }

    pub fn test(&self) -> std::ops::Range<usize> {
        self.test_start..self.test_end
    }
}

/// The last `k` blocks of length `t / (k + 1)` are test blocks. Each fold
/// trains on rows strictly before `test_start - g(h)`; folds whose training
/// window has fewer than two rows are dropped.
pub fn purged_splits(t: usize, k: usize, h: u32) -> Vec<PurgedSplit> {
    if k == 0 || t < k + 1 {
        return Vec::new();
    }
    let size = t / (k + 1);
    let gap = gap_weeks(h);
    (0..k)
        .filter_map(|i| {
            let test_start = t - (k - i) * size;
            let test_end = if i + 1 == k { t } else { test_start + size };
            let train_end = test_start.checked_sub(gap)?;
            (train_end >= 2).then_some(PurgedSplit {
                fold: i,
                train_end,
                test_start,
                test_end,
            })
        })
        .collect()
}

/// CV layout for one horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub horizon: u32,
    pub folds: usize,
    pub splits: Vec<PurgedSplit>,
    pub skip_cv: bool,
}

/// Tries three folds for every horizon, drops to two if any horizon has
/// fewer than two valid splits, and flags the horizons that still fail.
pub fn plan_splits(t: usize, horizons: &[u32]) -> Vec<SplitPlan> {
    let enough = |k: usize| horizons.iter().all(|h| purged_splits(t, k, *h).len() >= 2);
    let k = if enough(3) { 3 } else { 2 };
    horizons
        .iter()
        .map(|&h| {
            let splits = purged_splits(t, k, h);
            SplitPlan {
                horizon: h,
                folds: k,
                skip_cv: splits.len() < 2,
                splits,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnetOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for EnetOptions {
    fn default() -> Self {
        EnetOptions {
            tol: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnetFit {
    pub coef: DMatrix<f64>,
    pub alpha: f64,
    pub objective: f64,
    pub sweeps: usize,
    pub converged: bool,
}

impl EnetFit {
    /// Rows with nonzero Euclidean norm.
    pub fn active_rows(&self) -> Vec<bool> {
        (0..self.coef.nrows()).map(|j| self.coef.row(j).norm() > SELECTION_EPS).collect()
    }
}

/// Sufficient statistics of one multitask problem:
/// `G = X'X / T`, `C = X'Y / T`, `yy = |Y|^2 / T`.
#[derive(Debug, Clone)]
pub struct EnetProblem {
    gram: DMatrix<f64>,
    cross: DMatrix<f64>,
    yy: f64,
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl EnetProblem {
    pub fn new(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() || x.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "design has {} rows, response {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("elastic net inputs must be finite".into()));
        }
        let t = x.nrows() as f64;
        Ok(EnetProblem {
            gram: x.tr_mul(x) / t,
            cross: x.tr_mul(y) / t,
            yy: y.norm_squared() / t,
            x: x.clone(),
            y: y.clone(),
        })
    }

    /// Smallest penalty at which `B = 0` is optimal: `2 max_j |X_j'Y| / T`.
    pub fn alpha_max(&self) -> f64 {
        (0..self.cross.nrows())
            .map(|j| self.cross.row(j).norm())
            .fold(0.0, f64::max)
            * 2.0
    }

    /// `(1/2T)|Y - XB|^2 + alpha (|B|_F^2 / 4 + sum_j |B_j| / 2)`.
    pub fn objective(&self, b: &DMatrix<f64>, alpha: f64) -> f64 {
        let fit = 0.5 * (self.yy - 2.0 * b.dot(&self.cross) + b.dot(&(&self.gram * b)));
        let fit = fit.max(0.0);
        let rows: f64 = (0..b.nrows()).map(|j| b.row(j).norm()).sum();
        fit + alpha * (0.25 * b.norm_squared() + 0.5 * rows)
    }

    /// Largest subgradient-optimality violation over rows.
    pub fn kkt_residual(&self, b: &DMatrix<f64>, alpha: f64) -> f64 {
        let grad = &self.gram * b - &self.cross;
        (0..b.nrows())
            .map(|j| {
                let g = grad.row(j) + b.row(j) * (alpha / 2.0);
                let bn = b.row(j).norm();
                if bn > 0.0 {
                    (g + b.row(j) * (alpha / 2.0 / bn)).norm()
                } else {
                    (g.norm() - alpha / 2.0).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Block coordinate descent with group soft-thresholding, optionally warm-started.
    pub fn solve(&self, alpha: f64, warm: Option<&DMatrix<f64>>, opts: EnetOptions) -> Result<EnetFit> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("penalty {alpha} must be finite and nonnegative")));
        }
        let (p, m) = (self.gram.nrows(), self.cross.ncols());
        if alpha == 0.0 {
            return self.least_squares();
        }
        let mut b = match warm {
            Some(w) if w.shape() == (p, m) => w.clone(),
            _ => DMatrix::zeros(p, m),
        };
        let half = alpha / 2.0;
        let mut sweeps = 0;
        let mut converged = false;
        let mut z = nalgebra::RowDVector::zeros(m);
        while sweeps < opts.max_sweeps {
            sweeps += 1;
            let mut max_delta: f64 = 0.0;
            for j in 0..p {
                let gjj = self.gram[(j, j)];
                // z = C_j - G_j B + G_jj B_j
                z.copy_from(&self.cross.row(j));
                for k in 0..p {
                    let g = self.gram[(j, k)];
                    if g != 0.0 && k != j {
                        for c in 0..m {
                            z[c] -= g * b[(k, c)];
                        }
                    }
                }
                let zn = z.norm();
                let denom = gjj + half;
                let new = if zn <= half { nalgebra::RowDVector::zeros(m) } else { &z * ((1.0 - half / zn) / denom) };
                for c in 0..m {
                    max_delta = max_delta.max((new[c] - b[(j, c)]).abs());
                }
                b.set_row(j, &new);
            }
            if max_delta < opts.tol {
                converged = true;
                break;
            }
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("elastic net diverged".into()));
        }
        Ok(EnetFit {
            objective: self.objective(&b, alpha),
            coef: b,
            alpha,
            sweeps,
            converged,
        })
    }

    fn least_squares(&self) -> Result<EnetFit> {
        let svd = self.x.clone().svd(true, true);
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let pinv = svd
            .pseudo_inverse(smax * 1e-12 * self.x.nrows().max(self.x.ncols()) as f64)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let b = pinv * &self.y;
        Ok(EnetFit {
            objective: self.objective(&b, 0.0),
            coef: b,
            alpha: 0.0,
            sweeps: 0,
            converged: true,
        })
    }
}

pub fn fit_multitask_enet(x: &DMatrix<f64>, y: &DMatrix<f64>, alpha: f64) -> Result<EnetFit> {
    EnetProblem::new(x, y)?.solve(alpha, None, EnetOptions::default())
}

/// `points` log-spaced penalties from `alpha_max` down to `ratio * alpha_max`.
pub fn alpha_grid(alpha_max: f64, points: usize, ratio: f64) -> Vec<f64> {
    if alpha_max <= 0.0 || points == 0 {
        return vec![0.0];
    }
    if points == 1 {
        return vec![alpha_max];
    }
    let (hi, lo) = (alpha_max.ln(), (alpha_max * ratio).ln());
    (0..points)
        .map(|i| (hi + (lo - hi) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

fn rows_of(m: &DMatrix<f64>, r: std::ops::Range<usize>) -> DMatrix<f64> {
    m.rows(r.start, r.len()).into_owned()
}

/// Penalty minimizing mean per-row squared validation error across folds.
/// Ties go to the larger penalty.
pub fn select_alpha(x: &DMatrix<f64>, y: &DMatrix<f64>, splits: &[PurgedSplit], grid: &[f64]) -> Result<f64> {
    if splits.len() < 2 {
        return Err(Error::InsufficientHistory("alpha selection needs at least two folds".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty penalty grid".into()));
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|a, b| grid[*b].total_cmp(&grid[*a]));
    let per_fold: Vec<Vec<f64>> = splits
        .par_iter()
        .map(|s| {
            let prob = EnetProblem::new(&rows_of(x, s.train()), &rows_of(y, s.train()))?;
            let (xt, yt) = (rows_of(x, s.test()), rows_of(y, s.test()));
            let mut losses = vec![0.0; grid.len()];
            let mut warm: Option<DMatrix<f64>> = None;
            for &i in &order {
                let fit = prob.solve(grid[i], warm.as_ref(), EnetOptions::default())?;
                losses[i] = (&yt - &xt * &fit.coef).norm_squared() / yt.nrows() as f64;
                warm = Some(fit.coef);
            }
            Ok(losses)
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, f64)> = None;
    for &i in &order {
        let loss = per_fold.iter().map(|l| l[i]).sum::<f64>() / per_fold.len() as f64;
        if best.is_none_or(|(_, bl)| loss < bl) {
            best = Some((grid[i], loss));
        }
    }
    Ok(best.unwrap().0)
}

/// Median of the available per-horizon penalties, 0.1 when there are none.
pub fn shared_alpha(alphas: &[f64]) -> f64 {
    if alphas.is_empty() {
        return FALLBACK_ALPHA;
    }
    let mut v = alphas.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn nbb_block_size(n: usize) -> usize {
    ((n as f64).cbrt().round() as usize).clamp(4, 20)
}

/// Non-overlapping block bootstrap: block starts are multiples of `b` not
/// exceeding `n - b`, drawn with replacement, sorted, expanded into runs of
/// length `b` and truncated to `n`.
pub fn nbb_indices(n: usize, b: usize, rng: &mut CounterRng) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let b = b.clamp(1, n);
    let candidates = (n - b) / b + 1;
    let mut starts: Vec<usize> = (0..n.div_ceil(b)).map(|_| rng.index(candidates) * b).collect();
    starts.sort_unstable();
    let mut out: Vec<usize> = starts.iter().flat_map(|s| *s..*s + b).collect();
    out.truncate(n);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub base: f64,
    pub conditional: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            base: 0.55,
            conditional: 0.50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSource {
    CrossValidated,
    Shared,
}

/// Selection frequencies for one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonStability {
    pub horizon: u32,
    pub alpha: f64,
    pub alpha_source: AlphaSource,
    pub folds: usize,
    pub replicates: usize,
    pub r_valid: usize,
    pub pi_base: BTreeMap<String, f64>,
    /// Keyed by feature name.
    pub pi_cond: BTreeMap<String, f64>,
    pub selected: Vec<FeatureId>,
}

/// Base and conditional frequencies from per-draw activity masks over `features`.
pub fn stability_probabilities(features: &[FeatureId], draws: &[Vec<bool>]) -> Result<(BTreeMap<String, f64>, BTreeMap<String, f64>)> {
    if draws.is_empty() {
        return Err(Error::Numerical("no valid bootstrap refits".into()));
    }
    let r = draws.len() as f64;
    let mut base_count: BTreeMap<&str, usize> = BTreeMap::new();
    let mut feat_count = vec![0usize; features.len()];
    for d in draws {
        let mut hit: BTreeMap<&str, bool> = BTreeMap::new();
        for (j, f) in features.iter().enumerate() {
            let e = hit.entry(f.base.as_str()).or_default();
            if d[j] {
                *e = true;
                feat_count[j] += 1;
            }
        }
        for (b, h) in hit {
            *base_count.entry(b).or_default() += usize::from(h);
        }
    }
    let pi_base: BTreeMap<String, f64> = base_count.iter().map(|(b, c)| (b.to_string(), *c as f64 / r)).collect();
    let pi_cond = features
        .iter()
        .zip(&feat_count)
        .map(|(f, c)| {
            let bc = base_count[f.base.as_str()];
            (f.name(), if bc == 0 { 0.0 } else { *c as f64 / bc as f64 })
        })
        .collect();
    Ok((pi_base, pi_cond))
}

/// Keeps bases with `pi_base >= tau_g`; within each kept base and family,
/// the single transform with the highest `pi_cond >= tau_c` (shorter window on ties).
pub fn apply_thresholds(
    features: &[FeatureId],
    pi_base: &BTreeMap<String, f64>,
    pi_cond: &BTreeMap<String, f64>,
    th: Thresholds,
) -> Vec<FeatureId> {
    let mut best: BTreeMap<(&str, Family), &FeatureId> = BTreeMap::new();
    for f in features {
        if pi_base.get(&f.base).copied().unwrap_or(0.0) < th.base {
            continue;
        }
        let pc = pi_cond.get(&f.name()).copied().unwrap_or(0.0);
        if pc < th.conditional {
            continue;
        }
        let slot = best.entry((f.base.as_str(), f.family)).or_insert(f);
        let cur = pi_cond.get(&slot.name()).copied().unwrap_or(0.0);
        if pc > cur || (pc == cur && f.window < slot.window) {
            *slot = f;
        }
    }
    let mut out: Vec<FeatureId> = best.into_values().cloned().collect();
    out.sort();
    out
}

/// Refits the elastic net on `replicates` block-bootstrap resamples at a
/// fixed penalty and returns one activity mask per successful refit, in
/// draw order.
pub fn bootstrap_masks(x: &DMatrix<f64>, y: &DMatrix<f64>, alpha: f64, replicates: usize, key: StreamKey) -> Vec<Vec<bool>> {
    let n = x.nrows();
    let b = nbb_block_size(n);
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let idx = nbb_indices(n, b, &mut key.child(r as u64).rng());
            let xb = x.select_rows(idx.iter());
            let yb = y.select_rows(idx.iter());
            EnetProblem::new(&xb, &yb)
                .and_then(|p| p.solve(alpha, None, EnetOptions::default()))
                .ok()
                .filter(|f| f.coef.iter().all(|v| v.is_finite()))
                .map(|f| f.active_rows())
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub replicates: usize,
    pub grid_points: usize,
    pub grid_ratio: f64,
    pub thresholds: Thresholds,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            replicates: 1000,
            grid_points: 100,
            grid_ratio: 1e-3,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub basket: String,
    pub horizons: Vec<HorizonStability>,
    pub union: Vec<FeatureId>,
}

impl StabilityReport {
    pub fn selected(&self) -> SelectedFeatures {
        SelectedFeatures {
            basket: self.basket.clone(),
            per_horizon: self
                .horizons
                .iter()
                .map(|h| (h.horizon, h.selected.clone()))
                .collect(),
            union: self.union.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeatures {
    pub basket: String,
    pub per_horizon: BTreeMap<u32, Vec<FeatureId>>,
    pub union: Vec<FeatureId>,
}

/// Stability selection on generic per-horizon designs.
/// `designs[i] = (horizon, X, Y)`; all designs share `features` as columns.
pub fn stability_select(
    designs: &[(u32, DMatrix<f64>, DMatrix<f64>)],
    features: &[FeatureId],
    cfg: &SelectionConfig,
    key: StreamKey,
) -> Result<(Vec<HorizonStability>, Vec<FeatureId>)> {
    let t = designs.first().map_or(0, |d| d.1.nrows());
    let horizons: Vec<u32> = designs.iter().map(|d| d.0).collect();
    let plans = plan_splits(t, &horizons);
    let cv: Vec<Option<f64>> = designs
        .iter()
        .zip(&plans)
        .map(|((_, x, y), plan)| {
            if plan.skip_cv || features.is_empty() {
                return Ok(None);
            }
            let amax = EnetProblem::new(x, y)?.alpha_max();
            let grid = alpha_grid(amax, cfg.grid_points, cfg.grid_ratio);
            select_alpha(x, y, &plan.splits, &grid).map(Some)
        })
        .collect::<Result<_>>()?;
    let shared = shared_alpha(&cv.iter().flatten().copied().collect::<Vec<_>>());

    let mut out = Vec::new();
    let mut union = std::collections::BTreeSet::new();
    for (((h, x, y), plan), a) in designs.iter().zip(&plans).zip(&cv) {
        let (alpha, source) = match a {
            Some(a) => (*a, AlphaSource::CrossValidated),
            None => (shared, AlphaSource::Shared),
        };
        let (pi_base, pi_cond, selected, r_valid) = if features.is_empty() {
            (BTreeMap::new(), BTreeMap::new(), Vec::new(), 0)
        } else {
            let masks = bootstrap_masks(x, y, alpha, cfg.replicates, key.child(u64::from(*h)));
            let (pb, pc) = stability_probabilities(features, &masks)
                .map_err(|e| Error::Numerical(format!("horizon {h}: {e}")))?;
            let sel = apply_thresholds(features, &pb, &pc, cfg.thresholds);
            (pb, pc, sel, masks.len())
        };
        union.extend(selected.iter().cloned());
        out.push(HorizonStability {
            horizon: *h,
            alpha,
            alpha_source: source,
            folds: plan.folds,
            replicates: cfg.replicates,
            r_valid,
            pi_base,
            pi_cond,
            selected,
        });
    }
    Ok((out, union.into_iter().collect()))
}

/// Runs stability selection on a basket tensor, regressing each horizon's
/// current standardized targets on its macro features over the full grid.
pub fn select_features(tensor: &FeatureTensor, cfg: &SelectionConfig, seed: u64) -> Result<StabilityReport> {
    let designs: Vec<(u32, DMatrix<f64>, DMatrix<f64>)> = tensor
        .meta
        .horizons
        .iter()
        .enumerate()
        .map(|(i, h)| (*h, tensor.x_macro[i].clone(), tensor.y_current[i].clone()))
        .collect();
    let key = StreamKey::new(seed).child_str(&tensor.meta.basket);
    let (horizons, union) = stability_select(&designs, &tensor.meta.features, cfg, key)?;
    Ok(StabilityReport {
        basket: tensor.meta.basket.clone(),
        horizons,
        union,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_examples() {
        let s = purged_splits(100, 3, 30);
        assert_eq!(s.len(), 3);
        // Test block starting at row 75 (0-based) trains on rows < 75 - 6.
        assert_eq!(s[2].test_start, 75);
        assert_eq!(s[2].train_end, 69);
        assert!(purged_splits(20, 3, 1095).is_empty());
        let plans = plan_splits(20, &[30, 1095]);
        assert!(plans[1].skip_cv);
        assert_eq!(plans[0].folds, 2);
    }

    #[test]
    fn nbb_examples() {
        assert_eq!(nbb_block_size(27), 4);
        assert_eq!(nbb_block_size(8000), 20);
        assert_eq!(nbb_block_size(1000), 10);
        let key = StreamKey::new(4);
        for r in 0..200 {
            let idx = nbb_indices(10, 4, &mut key.child(r).rng());
            assert_eq!(idx.len(), 10);
            for blk in idx.chunks(4) {
                assert!(blk[0] == 0 || blk[0] == 4);
                assert!(blk.windows(2).all(|w| w[1] == w[0] + 1));
            }
        }
    }

    #[test]
    fn shared_alpha_examples() {
        assert_eq!(shared_alpha(&[0.05, 0.2, 0.8]), 0.2);
        assert_eq!(shared_alpha(&[]), 0.1);
        assert_eq!(shared_alpha(&[0.3]), 0.3);
    }

    #[test]
    fn probability_examples() {
        let f = |b: &str, fam, w| FeatureId {
            base: b.into(),
            family: fam,
            window: w,
        };
        let feats = vec![f("A", Family::Ema, 4), f("A", Family::Ema, 8), f("Z", Family::Vol, 4)];
        let mut draws = Vec::new();
        for r in 0..1000 {
            draws.push(vec![r < 250, (250..500).contains(&r), false]);
        }
        let (pb, pc) = stability_probabilities(&feats, &draws).unwrap();
        assert_eq!(pb["A"], 0.5);
        assert_eq!(pc["A_EMA4"], 0.5);
        assert_eq!(pb["Z"], 0.0);
        assert_eq!(pc["Z_VOL4"], 0.0);

        let feats = vec![f("B", Family::Ema, 12), f("B", Family::Ema, 24), f("B", Family::Vol, 12)];
        let pb = BTreeMap::from([("B".to_string(), 0.6)]);
        let pc = BTreeMap::from([
            ("B_EMA12".to_string(), 0.6),
            ("B_EMA24".to_string(), 0.7),
            ("B_VOL12".to_string(), 0.4),
        ]);
        let sel = apply_thresholds(&feats, &pb, &pc, Thresholds::default());
        assert_eq!(sel, vec![f("B", Family::Ema, 24)]);
        let low = BTreeMap::from([("B".to_string(), 0.5)]);
        assert!(apply_thresholds(&feats, &low, &pc, Thresholds::default()).is_empty());
    }

    #[test]
    fn enet_limits() {
        let x = DMatrix::from_fn(12, 3, |r, c| ((r * 7 + c * 3) as f64 * 0.61).sin());
        let y = DMatrix::from_fn(12, 2, |r, c| ((r + c) as f64 * 0.9).cos());
        let prob = EnetProblem::new(&x, &y).unwrap();
        let amax = prob.alpha_max();
        let fit = prob.solve(amax, None, EnetOptions::default()).unwrap();
        assert!(fit.coef.iter().all(|v| *v == 0.0));
        let fit = prob.solve(amax * 0.1, None, EnetOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(prob.kkt_residual(&fit.coef, amax * 0.1) < 1e-6);
        let ls = prob.solve(0.0, None, EnetOptions::default()).unwrap();
        let normal = x.tr_mul(&(&y - &x * &ls.coef));
        assert!(normal.amax() < 1e-10);
        assert_eq!(
            select_alpha(&x, &y, &purged_splits(12, 2, 1), &[0.1]).unwrap(),
            0.1
        );
    }
}

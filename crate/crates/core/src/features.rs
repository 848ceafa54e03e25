//! Causal feature engineering: stationarity tags, transforms, EMA/VOL
//! features, weekly alignment, expanding z-scores and future-target tensors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{read_json, write_json, WeeklyMetricPanel};
use crate::panel::{parse_date, WeeklySeries, DATE_FORMAT};

pub const HORIZONS: [u32; 6] = [30, 90, 180, 365, 730, 1095];
pub const FEATURE_WINDOWS: [usize; 4] = [4, 8, 12, 24];
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stationarity {
    Stationary,
    UnitRoot,
    Ambiguous,
}

/// Deterministic term of the unit-root regressions: constant, or constant and trend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestSpec {
    C,
    Ct,
}

impl FromStr for TestSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c" => Ok(TestSpec::C),
            "ct" => Ok(TestSpec::Ct),
            other => Err(Error::InvalidInput(format!("unknown test spec {other:?}"))),
        }
    }
}

/// STATIONARY when DF-GLS and ZA reject and KPSS does not; UNIT_ROOT when
/// the opposite holds on all three; AMBIGUOUS otherwise.
pub fn decide_stationarity(dfgls_p: f64, kpss_p: f64, za_p: f64) -> Result<Stationarity> {
    for (name, p) in [("dfgls", dfgls_p), ("kpss", kpss_p), ("za", za_p)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("{name} p-value {p} outside [0, 1]")));
        }
    }
    Ok(
        if dfgls_p < SIGNIFICANCE && za_p < SIGNIFICANCE && kpss_p > SIGNIFICANCE {
            Stationarity::Stationary
        } else if dfgls_p >= SIGNIFICANCE && za_p >= SIGNIFICANCE && kpss_p <= SIGNIFICANCE {
            Stationarity::UnitRoot
        } else {
            Stationarity::Ambiguous
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransformTag {
    Level,
    Trend,
    Rw,
}

impl TransformTag {
    /// Tie-break rank, higher wins.
    fn conservatism(self) -> u8 {
        match self {
            TransformTag::Level => 0,
            TransformTag::Trend => 1,
            TransformTag::Rw => 2,
        }
    }
}

pub fn tag_from_decisions(c: Stationarity, ct: Stationarity) -> TransformTag {
    if c == Stationarity::Stationary {
        TransformTag::Level
    } else if ct == Stationarity::Stationary {
        TransformTag::Trend
    } else {
        TransformTag::Rw
    }
}

/// Majority tag; ties go to RW, then TREND, then LEVEL.
pub fn resolve_global_tag(tags: &[TransformTag]) -> Result<TransformTag> {
    let mut counts: BTreeMap<TransformTag, usize> = BTreeMap::new();
    for t in tags {
        *counts.entry(*t).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by_key(|(t, n)| (*n, t.conservatism()))
        .map(|(t, _)| t)
        .ok_or_else(|| Error::InvalidInput("no tags to resolve".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityRow {
    pub dfgls_p: f64,
    pub kpss_p: f64,
    pub za_p: f64,
    pub outcome: Stationarity,
}

/// Externally computed unit-root p-values keyed by (series id, spec).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StationarityTable {
    pub rows: BTreeMap<(String, TestSpec), StationarityRow>,
}

impl StationarityTable {
    pub fn insert(&mut self, series: &str, spec: TestSpec, dfgls_p: f64, kpss_p: f64, za_p: f64) -> Result<()> {
        let outcome = decide_stationarity(dfgls_p, kpss_p, za_p)?;
        self.rows.insert(
            (series.to_string(), spec),
            StationarityRow {
                dfgls_p,
                kpss_p,
                za_p,
                outcome,
            },
        );
        Ok(())
    }

    pub fn outcome(&self, series: &str, spec: TestSpec) -> Option<Stationarity> {
        self.rows.get(&(series.to_string(), spec)).map(|r| r.outcome)
    }

    /// Tag for one series id. A missing spec counts as not stationary;
    /// a series with no rows at all is treated as a random walk.
    pub fn tag(&self, series: &str) -> (TransformTag, Option<String>) {
        let c = self.outcome(series, TestSpec::C);
        let ct = self.outcome(series, TestSpec::Ct);
        let note = match (c, ct) {
            (None, None) => Some(format!("no stationarity results for {series}; treating as RW")),
            (None, _) | (_, None) => Some(format!("incomplete stationarity results for {series}")),
            _ => None,
        };
        let tag = tag_from_decisions(
            c.unwrap_or(Stationarity::Ambiguous),
            ct.unwrap_or(Stationarity::Ambiguous),
        );
        (tag, note)
    }

    /// Reads `series,spec,dfgls_p,kpss_p,za_p`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut table = StationarityTable::default();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let bad = || Error::Data(format!("{}: malformed row {}", path.display(), i + 1));
            let p = |j: usize| rec.get(j).and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(bad);
            let series = rec.get(0).ok_or_else(bad)?.trim();
            let spec: TestSpec = rec.get(1).ok_or_else(bad)?.parse()?;
            table.insert(series, spec, p(2)?, p(3)?, p(4)?)?;
        }
        Ok(table)
    }
}

/// Fractional-differencing weights `w_0 = 1`, `w_k = w_{k-1} (k - 1 - d) / k`,
/// up to `k_max` and stopping before the first weight below `1e-10` in magnitude.
pub fn frac_diff_weights(d: f64, k_max: usize) -> Vec<f64> {
    let mut w = vec![1.0];
    for k in 1..=k_max {
        let next = w[k - 1] * (-(d - (k as f64 - 1.0)) / k as f64);
        if next.abs() < 1e-10 {
            break;
        }
        w.push(next);
    }
    w
}

/// `y_t = sum_k w_k x_{t-k}` for `t >= 1`, using whatever lags exist during warmup.
/// Output index `i` corresponds to input index `i + 1`.
pub fn frac_diff(x: &[f64], d: f64, k_max: usize) -> Vec<f64> {
    let w = frac_diff_weights(d, k_max);
    (1..x.len())
        .map(|t| w.iter().take(t + 1).enumerate().map(|(k, wk)| wk * x[t - k]).sum())
        .collect()
}

pub fn first_diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|p| p[1] - p[0]).collect()
}

/// End-of-window residual of an OLS line fitted over each trailing window of
/// length `window`. Output index `i` corresponds to input `i + window - 1`.
/// Series shorter than the window fall back to first differences.
pub fn rolling_detrend(x: &[f64], window: usize) -> Vec<f64> {
    if window < 2 || x.len() < window {
        return first_diff(x);
    }
    let l = window as f64;
    let jbar = (l - 1.0) / 2.0;
    let sxx: f64 = (0..window).map(|j| (j as f64 - jbar).powi(2)).sum();
    x.windows(window)
        .map(|win| {
            let ybar = win.iter().sum::<f64>() / l;
            let sxy: f64 = win.iter().enumerate().map(|(j, y)| (j as f64 - jbar) * (y - ybar)).sum();
            let beta = sxy / sxx;
            let fitted = ybar + beta * (l - 1.0 - jbar);
            win[window - 1] - fitted
        })
        .collect()
}

/// EMA with `alpha = 2 / (w + 1)`, seeded by the mean of the first `w` values.
/// Output index `i` corresponds to input `i + w - 1`.
pub fn ema(x: &[f64], w: usize) -> Vec<f64> {
    if w == 0 || x.len() < w {
        return Vec::new();
    }
    let alpha = 2.0 / (w as f64 + 1.0);
    let mut prev = x[..w].iter().sum::<f64>() / w as f64;
    let mut out = Vec::with_capacity(x.len() - w + 1);
    out.push(prev);
    for v in &x[w..] {
        prev = alpha * v + (1.0 - alpha) * prev;
        out.push(prev);
    }
    out
}

/// Trailing-window sample standard deviation. Output index `i` corresponds to input `i + w - 1`.
pub fn rolling_vol(x: &[f64], w: usize) -> Vec<f64> {
    if w < 2 || x.len() < w {
        return Vec::new();
    }
    x.windows(w)
        .map(|win| {
            let m = win.iter().sum::<f64>() / w as f64;
            (win.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (w - 1) as f64).sqrt()
        })
        .collect()
}

/// Expanding-window z-scores with population std clipped below at `eps`.
/// Returns the scores and the clipped scale at each row.
pub fn causal_zscore(x: &[f64], eps: f64) -> (Vec<f64>, Vec<f64>) {
    let mut z = Vec::with_capacity(x.len());
    let mut scale = Vec::with_capacity(x.len());
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let n = (i + 1) as f64;
        let delta = v - mean;
        mean += delta / n;
        m2 += delta * (v - mean);
        let s = (m2.max(0.0) / n).sqrt().max(eps);
        z.push((v - mean) / s);
        scale.push(s);
    }
    (z, scale)
}

/// Training gap in weeks: `ceil(h / 7) + 1`.
pub fn gap_weeks(h: u32) -> usize {
    h.div_ceil(7) as usize + 1
}

/// Shifts each horizon's current targets forward by its gap. Row `t` of the
/// result is row `t + g(h)` of the input, for `t < T - g_max`.
pub fn build_future_targets(y_current: &[DMatrix<f64>], horizons: &[u32]) -> Result<(Vec<DMatrix<f64>>, usize)> {
    let t_len = y_current.first().map_or(0, |m| m.nrows());
    let g_max = horizons.iter().map(|h| gap_weeks(*h)).max().unwrap_or(0);
    if t_len <= g_max {
        return Err(Error::InsufficientHistory(format!(
            "aligned grid has {t_len} weeks, need more than the {g_max}-week gap"
        )));
    }
    let t_star = t_len - g_max;
    let out = y_current
        .iter()
        .zip(horizons)
        .map(|(y, h)| y.rows(gap_weeks(*h), t_star).into_owned())
        .collect();
    Ok((out, t_star))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    MedianEr,
    Cvar10,
    Top25Mean,
    Sharpe,
}

impl TargetKind {
    pub const ALL: [TargetKind; 4] = [
        TargetKind::MedianEr,
        TargetKind::Cvar10,
        TargetKind::Top25Mean,
        TargetKind::Sharpe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TargetKind::MedianEr => "median_er",
            TargetKind::Cvar10 => "cvar10",
            TargetKind::Top25Mean => "top25_mean",
            TargetKind::Sharpe => "sharpe",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Weekly target series for one basket from its per-interval weekly metric
/// panels. Horizons are interval upper bounds; undefined Sharpe weeks are absent.
pub fn targets_from_weekly(panels: &[WeeklyMetricPanel]) -> BTreeMap<(u32, TargetKind), WeeklySeries> {
    let mut out = BTreeMap::new();
    for p in panels {
        let Some(iv) = p.interval else { continue };
        for kind in TargetKind::ALL {
            let mut s = WeeklySeries::default();
            for (monday, m) in &p.weeks {
                let v = match kind {
                    TargetKind::MedianEr => Some(m.median),
                    TargetKind::Cvar10 => Some(m.cvar),
                    TargetKind::Top25Mean => Some(m.top25_mean),
                    TargetKind::Sharpe => m.sharpe,
                };
                if let Some(v) = v {
                    s.mondays.push(*monday);
                    s.values.push(v);
                }
            }
            out.insert((iv.upper, kind), s);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Family {
    Ema,
    Vol,
}

/// One macro feature column: a transform family applied to a base series.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureId {
    pub base: String,
    pub family: Family,
    pub window: usize,
}

impl FeatureId {
    pub fn name(&self) -> String {
        let fam = match self.family {
            Family::Ema => "EMA",
            Family::Vol => "VOL",
        };
        format!("{}_{}{}", self.base, fam, self.window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub horizons: Vec<u32>,
    pub frac_d: f64,
    pub frac_k: usize,
    pub detrend_window: usize,
    pub windows: Vec<usize>,
    pub zscore_eps: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            horizons: HORIZONS.to_vec(),
            frac_d: 0.5,
            frac_k: 200,
            detrend_window: 52,
            windows: FEATURE_WINDOWS.to_vec(),
            zscore_eps: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub basket: String,
    pub grid: Vec<NaiveDate>,
    pub horizons: Vec<u32>,
    pub gaps: Vec<usize>,
    pub t_star: usize,
    pub targets: Vec<TargetKind>,
    pub features: Vec<FeatureId>,
    /// `[horizon][target]`
    pub ref_scale_y: Vec<Vec<f64>>,
    /// `[horizon][feature]`
    pub ref_scale_x: Vec<Vec<f64>>,
    pub tags: BTreeMap<String, TransformTag>,
    pub warnings: Vec<String>,
}

/// Aligned, standardized tensors for one basket. Matrices are stored per
/// horizon: `y_current[h]` is `T x n_y`, `x_macro[h]` is `T x n_x`,
/// `y_future[h]` is `t* x n_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub meta: TensorMeta,
    pub y_current: Vec<DMatrix<f64>>,
    pub x_macro: Vec<DMatrix<f64>>,
    pub y_future: Vec<DMatrix<f64>>,
}

impl FeatureTensor {
    pub fn rows(&self) -> usize {
        self.meta.grid.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.meta
            .targets
            .iter()
            .map(|t| t.name().to_string())
            .chain(self.meta.features.iter().map(FeatureId::name))
            .collect()
    }
}

/// A dated series restricted to its last run of consecutive weeks.
fn last_run(s: &WeeklySeries) -> (Vec<NaiveDate>, Vec<f64>) {
    let n = s.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut start = n - 1;
    while start > 0 && (s.mondays[start] - s.mondays[start - 1]).num_days() == 7 {
        start -= 1;
    }
    (s.mondays[start..].to_vec(), s.values[start..].to_vec())
}

/// Applies a shortening transform and re-stamps the output on the trailing dates.
fn transform_dated(dates: &[NaiveDate], values: &[f64], f: impl Fn(&[f64]) -> Vec<f64>) -> WeeklySeries {
    let out = f(values);
    let offset = values.len() - out.len();
    WeeklySeries {
        mondays: dates[offset..].to_vec(),
        values: out,
    }
}

fn apply_tag(series: &WeeklySeries, tag: TransformTag, macro_series: bool, cfg: &FeatureConfig) -> WeeklySeries {
    let (dates, values) = last_run(series);
    match tag {
        TransformTag::Level => WeeklySeries { mondays: dates, values },
        TransformTag::Trend => transform_dated(&dates, &values, |x| rolling_detrend(x, cfg.detrend_window)),
        TransformTag::Rw if macro_series => transform_dated(&dates, &values, |x| frac_diff(x, cfg.frac_d, cfg.frac_k)),
        TransformTag::Rw => transform_dated(&dates, &values, first_diff),
    }
}

fn endogenous_id(kind: TargetKind, h: u32) -> String {
    format!("{}@{}", kind.name(), h)
}

/// Full feature stage for one basket: tag-dependent transforms, EMA/VOL
/// features of macro series, intersection alignment, expanding z-scores,
/// future targets and reference scales.
pub fn build_tensor(
    basket: &str,
    targets: &BTreeMap<(u32, TargetKind), WeeklySeries>,
    macros: &BTreeMap<String, WeeklySeries>,
    stationarity: &StationarityTable,
    cfg: &FeatureConfig,
) -> Result<FeatureTensor> {
    if cfg.horizons.is_empty() {
        return Err(Error::InvalidInput("no horizons configured".into()));
    }
    let mut warnings = Vec::new();
    let mut tags = BTreeMap::new();

    // Endogenous targets: one global tag per target across horizons.
    let mut target_series: BTreeMap<(u32, TargetKind), WeeklySeries> = BTreeMap::new();
    for kind in TargetKind::ALL {
        let mut per_h = Vec::new();
        for &h in &cfg.horizons {
            let scoped = format!("{basket}/{}", endogenous_id(kind, h));
            let id = if stationarity.outcome(&scoped, TestSpec::C).is_some()
                || stationarity.outcome(&scoped, TestSpec::Ct).is_some()
            {
                scoped
            } else {
                endogenous_id(kind, h)
            };
            let (tag, note) = stationarity.tag(&id);
            warnings.extend(note);
            per_h.push(tag);
        }
        let tag = resolve_global_tag(&per_h)?;
        tags.insert(kind.name().to_string(), tag);
        for &h in &cfg.horizons {
            let raw = targets.get(&(h, kind)).ok_or_else(|| {
                Error::Data(format!("basket {basket}: no weekly {} series for horizon {h}", kind.name()))
            })?;
            target_series.insert((h, kind), apply_tag(raw, tag, false, cfg));
        }
    }

    // Macro features.
    let feature_series: Vec<(FeatureId, WeeklySeries)> = macros
        .par_iter()
        .map(|(base, raw)| {
            let (tag, note) = stationarity.tag(base);
            let transformed = apply_tag(raw, tag, true, cfg);
            let mut out = Vec::new();
            for &w in &cfg.windows {
                for family in [Family::Ema, Family::Vol] {
                    let f = match family {
                        Family::Ema => ema(&transformed.values, w),
                        Family::Vol => rolling_vol(&transformed.values, w),
                    };
                    let offset = transformed.len() - f.len();
                    let id = FeatureId {
                        base: base.clone(),
                        family,
                        window: w,
                    };
                    out.push((
                        id,
                        WeeklySeries {
                            mondays: transformed.mondays[offset..].to_vec(),
                            values: f,
                        },
                    ));
                }
            }
            (base.clone(), tag, note, out)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flat_map(|(base, tag, note, out)| {
            tags.insert(base, tag);
            warnings.extend(note);
            out
        })
        .collect::<BTreeMap<_, _>>()
        .into_iter()
        .collect();

    // Intersection grid.
    let mut named: Vec<(String, &WeeklySeries)> = target_series
        .iter()
        .map(|((h, k), s)| (endogenous_id(*k, *h), s))
        .collect();
    named.extend(feature_series.iter().map(|(id, s)| (id.name(), s)));
    let mut grid: Option<BTreeSet<NaiveDate>> = None;
    for (_, s) in &named {
        let dates: BTreeSet<NaiveDate> = s.mondays.iter().copied().collect();
        grid = Some(match grid {
            None => dates,
            Some(g) => g.intersection(&dates).copied().collect(),
        });
    }
    let grid: Vec<NaiveDate> = grid.unwrap_or_default().into_iter().collect();
    if grid.is_empty() {
        let describe = |(n, s): &(String, &WeeklySeries)| match (s.mondays.first(), s.mondays.last()) {
            (Some(a), Some(b)) => format!("{n} [{a}..{b}]"),
            _ => format!("{n} [empty]"),
        };
        let latest_start = named.iter().max_by_key(|(_, s)| s.mondays.first().copied());
        let earliest_end = named.iter().min_by_key(|(_, s)| s.mondays.last().copied());
        return Err(Error::Data(format!(
            "basket {basket}: aligned grid is empty; limiting series: {} and {}",
            latest_start.map(describe).unwrap_or_default(),
            earliest_end.map(describe).unwrap_or_default()
        )));
    }

    let column = |s: &WeeklySeries| -> Vec<f64> { grid.iter().map(|d| s.get(*d).unwrap()).collect() };
    let t_len = grid.len();
    let n_y = TargetKind::ALL.len();
    let n_x = feature_series.len();
    let mut y_current = Vec::with_capacity(cfg.horizons.len());
    let mut x_macro = Vec::with_capacity(cfg.horizons.len());
    let mut scales_y = Vec::new();
    let mut scales_x = Vec::new();

    let x_cols: Vec<(Vec<f64>, Vec<f64>)> = feature_series
        .par_iter()
        .map(|(_, s)| causal_zscore(&column(s), cfg.zscore_eps))
        .collect();
    for &h in &cfg.horizons {
        let mut y = DMatrix::zeros(t_len, n_y);
        let mut sy = Vec::new();
        for (k, kind) in TargetKind::ALL.iter().enumerate() {
            let (z, s) = causal_zscore(&column(&target_series[&(h, *kind)]), cfg.zscore_eps);
            y.set_column(k, &nalgebra::DVector::from_vec(z));
            sy.push(s);
        }
        let mut x = DMatrix::zeros(t_len, n_x);
        for (j, (z, _)) in x_cols.iter().enumerate() {
            x.set_column(j, &nalgebra::DVector::from_column_slice(z));
        }
        y_current.push(y);
        x_macro.push(x);
        scales_y.push(sy);
        scales_x.push(x_cols.iter().map(|(_, s)| s.clone()).collect::<Vec<_>>());
    }

    let (y_future, t_star) = build_future_targets(&y_current, &cfg.horizons)?;
    let at = t_star - 1;
    let ref_scale_y = scales_y.iter().map(|per_k| per_k.iter().map(|s| s[at]).collect()).collect();
    let ref_scale_x = scales_x.iter().map(|per_j| per_j.iter().map(|s| s[at]).collect()).collect();

    for w in &warnings {
        warn!("{w}");
    }
    Ok(FeatureTensor {
        meta: TensorMeta {
            basket: basket.to_string(),
            grid,
            horizons: cfg.horizons.clone(),
            gaps: cfg.horizons.iter().map(|h| gap_weeks(*h)).collect(),
            t_star,
            targets: TargetKind::ALL.to_vec(),
            features: feature_series.into_iter().map(|(id, _)| id).collect(),
            ref_scale_y,
            ref_scale_x,
            tags,
            warnings,
        },
        y_current,
        x_macro,
        y_future,
    })
}

fn write_matrix(path: &Path, dates: &[NaiveDate], names: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["week".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for r in 0..m.nrows() {
        let mut rec = vec![dates[r].format(DATE_FORMAT).to_string()];
        rec.extend(m.row(r).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut m = DMatrix::zeros(rows, cols);
    let mut n = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        if i >= rows || rec.len() != cols + 1 || parse_date(&rec[0]).is_none() {
            return Err(Error::Data(format!("{}: unexpected shape at row {}", path.display(), i + 1)));
        }
        for j in 0..cols {
            m[(i, j)] = rec[j + 1]
                .parse()
                .map_err(|_| Error::Data(format!("{}: bad value at row {}", path.display(), i + 1)))?;
        }
        n += 1;
    }
    if n != rows {
        return Err(Error::Data(format!("{}: expected {rows} rows, found {n}", path.display())));
    }
    Ok(m)
}

/// Writes `tensor_meta.json` plus `y_current_h{h}.csv`, `x_macro_h{h}.csv`
/// and `y_future_h{h}.csv` for each horizon.
pub fn write_tensor(dir: &Path, t: &FeatureTensor) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join("tensor_meta.json"), &t.meta)?;
    let ynames: Vec<String> = t.meta.targets.iter().map(|k| k.name().to_string()).collect();
    let xnames: Vec<String> = t.meta.features.iter().map(FeatureId::name).collect();
    for (i, h) in t.meta.horizons.iter().enumerate() {
        write_matrix(&dir.join(format!("y_current_h{h}.csv")), &t.meta.grid, &ynames, &t.y_current[i])?;
        write_matrix(&dir.join(format!("x_macro_h{h}.csv")), &t.meta.grid, &xnames, &t.x_macro[i])?;
        write_matrix(&dir.join(format!("y_future_h{h}.csv")), &t.meta.grid, &ynames, &t.y_future[i])?;
    }
    Ok(())
}

pub fn read_tensor(dir: &Path) -> Result<FeatureTensor> {
    let meta: TensorMeta = read_json(&dir.join("tensor_meta.json"))?;
    let (t, ny, nx) = (meta.grid.len(), meta.targets.len(), meta.features.len());
    let mut y_current = Vec::new();
    let mut x_macro = Vec::new();
    let mut y_future = Vec::new();
    for h in &meta.horizons {
        y_current.push(read_matrix(&dir.join(format!("y_current_h{h}.csv")), t, ny)?);
        x_macro.push(read_matrix(&dir.join(format!("x_macro_h{h}.csv")), t, nx)?);
        y_future.push(read_matrix(&dir.join(format!("y_future_h{h}.csv")), meta.t_star, ny)?);
    }
    Ok(FeatureTensor {
        meta,
        y_current,
        x_macro,
        y_future,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decisions_and_tags() {
        use Stationarity::*;
        assert_eq!(decide_stationarity(0.0, 0.1, 0.0).unwrap(), Stationary);
        assert_eq!(decide_stationarity(0.092, 0.023, 0.556).unwrap(), UnitRoot);
        assert_eq!(decide_stationarity(0.0, 0.010, 0.001).unwrap(), Ambiguous);
        assert!(decide_stationarity(1.2, 0.1, 0.0).is_err());

        assert_eq!(tag_from_decisions(Stationary, Stationary), TransformTag::Level);
        assert_eq!(tag_from_decisions(Ambiguous, Stationary), TransformTag::Trend);
        assert_eq!(tag_from_decisions(UnitRoot, UnitRoot), TransformTag::Rw);

        use TransformTag::*;
        assert_eq!(resolve_global_tag(&[Level, Level, Level, Level, Rw, Rw]).unwrap(), Level);
        assert_eq!(resolve_global_tag(&[Level, Level, Level, Rw, Rw, Rw]).unwrap(), Rw);
        assert_eq!(resolve_global_tag(&[Trend, Trend, Trend, Level, Level, Level]).unwrap(), Trend);
        assert!(resolve_global_tag(&[]).is_err());
    }

    #[test]
    fn frac_diff_pins() {
        let w = frac_diff_weights(0.5, 200);
        assert_eq!(&w[..4], &[1.0, -0.5, -0.125, -0.0625]);
        assert!(frac_diff(&[0.0; 30], 0.5, 200).iter().all(|v| *v == 0.0));
        let y = frac_diff(&[2.0; 30], 0.5, 200);
        assert!(y.windows(2).all(|p| p[1] < p[0]));
        assert!((y[0] - 2.0 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn simple_transforms() {
        assert_eq!(first_diff(&[1.0, 3.0, 6.0]), vec![2.0, 3.0]);
        assert!(first_diff(&[4.0]).is_empty());
        let line: Vec<f64> = (0..80).map(|t| 1.5 + 0.25 * t as f64).collect();
        assert!(rolling_detrend(&line, 52).iter().all(|r| r.abs() < 1e-12));
        assert_eq!(rolling_detrend(&line, 52).len(), 29);
        let short: Vec<f64> = (0..30).map(|t| (t * t) as f64).collect();
        assert_eq!(rolling_detrend(&short, 52), first_diff(&short));
        assert!(ema(&[3.0; 10], 4).iter().all(|v| *v == 3.0));
        assert!(ema(&[1.0; 3], 4).is_empty());
        let v = rolling_vol(&[0.0, 2.0], 2);
        assert!((v[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(rolling_vol(&[5.0; 6], 3).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zscore_and_gaps() {
        let (z, s) = causal_zscore(&[3.0, 3.0, 3.0], 1e-2);
        assert_eq!(z, vec![0.0; 3]);
        assert_eq!(s, vec![1e-2; 3]);
        let gaps: Vec<usize> = HORIZONS.iter().map(|h| gap_weeks(*h)).collect();
        assert_eq!(gaps, vec![6, 14, 27, 54, 106, 158]);
        let y = vec![DMatrix::from_fn(200, 1, |r, _| r as f64); 6];
        let (f, t_star) = build_future_targets(&y, &HORIZONS).unwrap();
        assert_eq!(t_star, 42);
        for (i, h) in HORIZONS.iter().enumerate() {
            assert_eq!(f[i][(0, 0)], gap_weeks(*h) as f64);
        }
        assert!(build_future_targets(&vec![DMatrix::zeros(158, 1); 6], &HORIZONS).is_err());
    }

    fn weekly(start: NaiveDate, values: Vec<f64>) -> WeeklySeries {
        WeeklySeries {
            mondays: (0..values.len()).map(|i| start + chrono::Duration::weeks(i as i64)).collect(),
            values,
        }
    }

    #[test]
    fn tensor_build_and_round_trip() {
        let start = NaiveDate::from_ymd_opt(2019, 1, 7).unwrap();
        let cfg = FeatureConfig {
            horizons: vec![30, 90],
            ..Default::default()
        };
        let mut targets = BTreeMap::new();
        for (i, h) in cfg.horizons.iter().enumerate() {
            for (k, kind) in TargetKind::ALL.iter().enumerate() {
                let vals = (0..120).map(|t| ((t * (k + 2) + i) as f64 * 0.37).sin()).collect();
                // Second horizon starts 3 weeks later.
                let s = weekly(start + chrono::Duration::weeks(3 * i as i64), vals);
                targets.insert((*h, *kind), s);
            }
        }
        let mut macros = BTreeMap::new();
        macros.insert("VIX".to_string(), weekly(start, (0..130).map(|t| 20.0 + (t as f64 * 0.21).cos()).collect()));
        macros.insert("DGS10".to_string(), weekly(start, (0..130).map(|t| 2.0 + 0.01 * t as f64).collect()));
        let mut st = StationarityTable::default();
        st.insert("VIX", TestSpec::C, 0.0, 0.1, 0.0).unwrap();
        st.insert("VIX", TestSpec::Ct, 0.0, 0.1, 0.0).unwrap();
        let t = build_tensor("BTC", &targets, &macros, &st, &cfg).unwrap();
        assert_eq!(t.meta.tags["VIX"], TransformTag::Level);
        assert_eq!(t.meta.tags["DGS10"], TransformTag::Rw);
        assert_eq!(t.meta.features.len(), 16);
        assert_eq!(t.meta.features[0].name(), "DGS10_EMA4");
        assert_eq!(t.meta.features[4].name(), "DGS10_VOL4");
        // DGS10 is fractionally differenced (one week) and then needs 24 weeks of EMA warmup.
        assert_eq!(t.meta.grid[0], start + chrono::Duration::weeks(24));
        assert_eq!(t.meta.t_star, t.rows() - 14);
        let dir = tempfile::tempdir().unwrap();
        write_tensor(dir.path(), &t).unwrap();
        assert_eq!(read_tensor(dir.path()).unwrap(), t);
    }

    #[test]
    fn empty_alignment_names_series() {
        let start = NaiveDate::from_ymd_opt(2019, 1, 7).unwrap();
        let cfg = FeatureConfig {
            horizons: vec![30],
            ..Default::default()
        };
        let mut targets = BTreeMap::new();
        for kind in TargetKind::ALL {
            targets.insert((30, kind), weekly(start, vec![1.0; 40]));
        }
        let mut macros = BTreeMap::new();
        macros.insert("LATE".to_string(), weekly(start + chrono::Duration::weeks(100), vec![1.0; 40]));
        let err = build_tensor("B", &targets, &macros, &StationarityTable::default(), &cfg).unwrap_err();
        assert!(err.to_string().contains("LATE"));
    }
}

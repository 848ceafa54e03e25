//! Tail-risk and return statistics over excess-return samples.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{week_monday, DATE_FORMAT};
use crate::sim::{EpisodeBatch, HorizonInterval};

pub const OVERALL_ALPHA: f64 = 0.01;
pub const WEEKLY_ALPHA: f64 = 0.10;
pub const SIG_LOSS_THRESHOLD: f64 = -0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Overall,
    Weekly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub flavor: Flavor,
    pub alpha: f64,
    pub n: usize,
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

/// Type-7 quantile of an ascending sample: linear interpolation at position `(n-1)p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean_of(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

fn ratio(num: f64, den: Option<f64>) -> Option<f64> {
    den.filter(|d| *d > 0.0 && d.is_finite()).map(|d| num / d)
}

/// Computes the full statistic suite. Skewness and kurtosis are reported
/// only for the overall flavor with at least four observations.
pub fn compute_metrics(sample: &[f64], alpha: f64, flavor: Flavor) -> Result<MetricSet> {
    if sample.is_empty() {
        return Err(Error::InvalidInput("metric sample is empty".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1)")));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("metric sample contains non-finite values".into()));
    }
    let mut sorted = sample.to_vec();
    if sorted.len() > 1 << 16 {
        sorted.par_sort_unstable_by(f64::total_cmp);
    } else {
        sorted.sort_unstable_by(f64::total_cmp);
    }
    let n = sorted.len();
    let nf = n as f64;
    let mean = mean_of(&sorted);
    let std = sample_std(&sorted);
    let median = quantile_sorted(&sorted, 0.5);
    let q25 = quantile_sorted(&sorted, 0.25);
    let q75 = quantile_sorted(&sorted, 0.75);
    let qa = quantile_sorted(&sorted, alpha);

    let tail_len = sorted.partition_point(|x| *x <= qa);
    // Every tail value is <= qa; the min only absorbs summation rounding.
    let tail_mean = mean_of(&sorted[..tail_len]).min(qa);
    let neg_len = sorted.partition_point(|x| *x < 0.0);
    let top_start = sorted.partition_point(|x| *x < q75);
    let top = &sorted[top_start..];

    let (skew_g1, kurt_g2) = if flavor == Flavor::Overall && n >= 4 {
        let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
        for x in &sorted {
            let d = x - mean;
            let d2 = d * d;
            s2 += d2;
            s3 += d2 * d;
            s4 += d2 * d2;
        }
        if s2 > 0.0 {
            let skew = nf * (nf - 1.0).sqrt() / (nf - 2.0) * s3 / s2.powf(1.5);
            let kurt = nf * (nf + 1.0) * (nf - 1.0) * s4 / ((nf - 2.0) * (nf - 3.0) * s2 * s2)
                - 3.0 * (nf - 1.0).powi(2) / ((nf - 2.0) * (nf - 3.0));
            (Some(skew), Some(kurt))
        } else {
            (None, None)
        }
    } else {
        (None, None)
    };

    Ok(MetricSet {
        flavor,
        alpha,
        n,
        mean,
        median,
        std,
        iqr: q75 - q25,
        sharpe: ratio(mean, std),
        sortino: ratio(mean, sample_std(&sorted[..neg_len])),
        var: (-qa).max(0.0),
        cvar: (-tail_mean).max(0.0),
        p_profit: (n - sorted.partition_point(|x| *x <= 0.0)) as f64 / nf,
        p_sig_loss: sorted.partition_point(|x| *x < SIG_LOSS_THRESHOLD) as f64 / nf,
        q75,
        top25_mean: mean_of(top).max(q75),
        top25_prop: top.len() as f64 / nf,
        skew_g1,
        kurt_g2,
    })
}

/// One overall row. `interval == None` marks the basket's pooled row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallRow {
    pub basket: String,
    pub interval: Option<HorizonInterval>,
    pub metrics: MetricSet,
}

/// Metrics per (basket, interval) at the 1% level, followed by one pooled row
/// per basket over all of its episodes. Empty batches emit no row.
pub fn aggregate_overall(batches: &[EpisodeBatch]) -> Result<Vec<OverallRow>> {
    let mut by_key: BTreeMap<(String, Option<HorizonInterval>), Vec<f64>> = BTreeMap::new();
    for b in batches.iter().filter(|b| !b.is_empty()) {
        by_key
            .entry((b.basket.clone(), b.interval))
            .or_default()
            .extend_from_slice(&b.excess_return);
        by_key
            .entry((b.basket.clone(), None))
            .or_default()
            .extend_from_slice(&b.excess_return);
    }
    let mut rows = by_key
        .into_par_iter()
        .map(|((basket, interval), xs)| {
            Ok(OverallRow {
                basket,
                interval,
                metrics: compute_metrics(&xs, OVERALL_ALPHA, Flavor::Overall)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        a.basket
            .cmp(&b.basket)
            .then_with(|| a.interval.is_none().cmp(&b.interval.is_none()))
            .then_with(|| a.interval.cmp(&b.interval))
    });
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyMetricPanel {
    pub basket: String,
    pub interval: Option<HorizonInterval>,
    pub weeks: Vec<(NaiveDate, MetricSet)>,
}

impl WeeklyMetricPanel {
    pub fn get(&self, monday: NaiveDate) -> Option<&MetricSet> {
        self.weeks
            .binary_search_by_key(&monday, |(d, _)| *d)
            .ok()
            .map(|i| &self.weeks[i].1)
    }
}

/// Groups episodes by the Monday of their sell week and computes weekly
/// metrics at the 10% level.
pub fn aggregate_weekly(batch: &EpisodeBatch) -> Result<WeeklyMetricPanel> {
    let start = match batch.start {
        Some(s) => s,
        None if batch.is_empty() => NaiveDate::MIN,
        None => return Err(Error::InvalidInput("episode batch has no calendar start".into())),
    };
    let mut groups: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for i in 0..batch.len() {
        let d = start + chrono::Duration::days(i64::from(batch.sell_day[i]));
        groups.entry(week_monday(d)).or_default().push(batch.excess_return[i]);
    }
    let weeks = groups
        .into_par_iter()
        .map(|(m, xs)| Ok((m, compute_metrics(&xs, WEEKLY_ALPHA, Flavor::Weekly)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(WeeklyMetricPanel {
        basket: batch.basket.clone(),
        interval: batch.interval,
        weeks,
    })
}

pub const METRIC_COLUMNS: [&str; 18] = [
    "flavor",
    "alpha",
    "n",
    "mean",
    "median",
    "std",
    "iqr",
    "sharpe",
    "sortino",
    "var",
    "cvar",
    "p_profit",
    "p_sig_loss",
    "q75",
    "top25_mean",
    "top25_prop",
    "skew_g1",
    "kurt_g2",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn metric_cells(m: &MetricSet) -> Vec<String> {
    let flavor = match m.flavor {
        Flavor::Overall => "overall",
        Flavor::Weekly => "weekly",
    };
    vec![
        flavor.to_string(),
        m.alpha.to_string(),
        m.n.to_string(),
        m.mean.to_string(),
        m.median.to_string(),
        cell(m.std),
        m.iqr.to_string(),
        cell(m.sharpe),
        cell(m.sortino),
        m.var.to_string(),
        m.cvar.to_string(),
        m.p_profit.to_string(),
        m.p_sig_loss.to_string(),
        m.q75.to_string(),
        m.top25_mean.to_string(),
        m.top25_prop.to_string(),
        cell(m.skew_g1),
        cell(m.kurt_g2),
    ]
}

fn interval_label(iv: Option<HorizonInterval>) -> String {
    iv.map_or_else(|| "all".to_string(), |i| i.label())
}

/// Columns: basket, interval (`all` for pooled rows), then [`METRIC_COLUMNS`].
/// Undefined statistics are empty cells.
pub fn write_overall_csv(path: &Path, rows: &[OverallRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["basket", "interval"];
    header.extend(METRIC_COLUMNS);
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        let mut rec = vec![r.basket.clone(), interval_label(r.interval)];
        rec.extend(metric_cells(&r.metrics));
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Columns: basket, interval, week (Monday), then [`METRIC_COLUMNS`].
pub fn write_weekly_csv(path: &Path, panels: &[WeeklyMetricPanel]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["basket", "interval", "week"];
    header.extend(METRIC_COLUMNS);
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for p in panels {
        for (monday, m) in &p.weeks {
            let mut rec = vec![
                p.basket.clone(),
                interval_label(p.interval),
                monday.format(DATE_FORMAT).to_string(),
            ];
            rec.extend(metric_cells(m));
            w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_example() {
        let m = compute_metrics(&[-0.5, -0.2, 0.1, 0.3], 0.10, Flavor::Overall).unwrap();
        assert!((m.var - 0.41).abs() < 1e-12);
        assert!((m.cvar - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quartile_example() {
        let m = compute_metrics(&[1.0, 2.0, 3.0, 4.0], 0.01, Flavor::Overall).unwrap();
        assert_eq!(m.mean, 2.5);
        assert_eq!(m.median, 2.5);
        assert_eq!(m.q75, 3.25);
        assert_eq!(m.top25_mean, 4.0);
        assert_eq!(m.top25_prop, 0.25);
        assert_eq!(m.sortino, None);
        assert_eq!(m.var, 0.0);
    }

    #[test]
    fn symmetric_skew_and_nulls() {
        let m = compute_metrics(&[-1.0, 0.0, 1.0, 0.0], 0.01, Flavor::Overall).unwrap();
        assert_eq!(m.skew_g1, Some(0.0));
        let w = compute_metrics(&[-1.0, 0.0, 1.0, 0.0], 0.1, Flavor::Weekly).unwrap();
        assert_eq!(w.skew_g1, None);
        let one = compute_metrics(&[0.3], 0.01, Flavor::Overall).unwrap();
        assert_eq!((one.n, one.mean, one.median, one.std), (1, 0.3, 0.3, None));
        let flat = compute_metrics(&[0.2; 5], 0.01, Flavor::Overall).unwrap();
        assert_eq!(flat.sharpe, None);
        assert!(compute_metrics(&[], 0.1, Flavor::Weekly).is_err());
        assert!(compute_metrics(&[1.0], 1.0, Flavor::Weekly).is_err());
    }

    fn batch(basket: &str, iv: HorizonInterval, xs: &[f64], sell: &[u32]) -> EpisodeBatch {
        EpisodeBatch {
            basket: basket.into(),
            interval: Some(iv),
            start: NaiveDate::from_ymd_opt(2024, 1, 1), // a Monday
            excess_return: xs.to_vec(),
            sell_day: sell.to_vec(),
            coin: vec![0; xs.len()],
            ..Default::default()
        }
    }

    #[test]
    fn pooling_doubles_n() {
        let iv = HorizonInterval::CANONICAL[0];
        let iv2 = HorizonInterval::CANONICAL[1];
        let b1 = batch("B", iv, &[0.1, -0.2, 0.3], &[0, 1, 2]);
        let b2 = batch("B", iv2, &[0.1, -0.2, 0.3], &[0, 1, 2]);
        let rows = aggregate_overall(&[b1, b2, batch("E", iv, &[], &[])]).unwrap();
        assert_eq!(rows.len(), 3);
        let pooled = rows.iter().find(|r| r.interval.is_none()).unwrap();
        assert_eq!(pooled.metrics.n, 6);
        assert!((pooled.metrics.mean - rows[0].metrics.mean).abs() < 1e-15);
        assert!(rows.last().unwrap().interval.is_none());
    }

    #[test]
    fn weekly_boundaries() {
        let iv = HorizonInterval::CANONICAL[0];
        // Day 6 is Sunday 2024-01-07, day 7 Monday 2024-01-08.
        let p = aggregate_weekly(&batch("B", iv, &[0.1, 0.2, 0.3], &[0, 6, 7])).unwrap();
        assert_eq!(p.weeks.len(), 2);
        assert_eq!(p.weeks[0].1.n, 2);
        assert_eq!(p.weeks[1].0, NaiveDate::from_ymd_opt(2024, 1, 8).unwrap());
        assert!(p.weeks.iter().all(|(_, m)| m.alpha == WEEKLY_ALPHA && m.kurt_g2.is_none()));
    }

    #[test]
    fn csv_nulls_are_empty() {
        let iv = HorizonInterval::CANONICAL[0];
        let rows = aggregate_overall(&[batch("B", iv, &[0.5], &[0])]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_overall_csv(&p, &rows).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.lines().nth(1).unwrap().contains(",,"));
        assert!(!text.contains("NaN"));
        let jp = dir.path().join("m.json");
        write_json(&jp, &rows).unwrap();
        assert!(fs::read_to_string(&jp).unwrap().contains("null"));
    }
}

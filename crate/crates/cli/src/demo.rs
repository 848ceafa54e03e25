//! Synthetic input data in the layout the pipeline reads, for smoke runs and
//! trying the tool without market data.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use chrono::{Datelike, Duration, NaiveDate, Weekday};
use hodl_core::panel::DATE_FORMAT;
use hodl_core::features::HORIZONS;
use hodl_core::{CounterRng, StreamKey, TargetKind};
use serde_json::json;

pub struct DemoSpec {
    pub tokens: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub seed: u64,
}

impl Default for DemoSpec {
    fn default() -> Self {
        DemoSpec {
            tokens: 3,
            start: NaiveDate::from_ymd_opt(2017, 1, 2).unwrap(),
            end: NaiveDate::from_ymd_opt(2025, 6, 30).unwrap(),
            seed: 1,
        }
    }
}

fn normal(r: &mut CounterRng) -> f64 {
    let u1 = 1.0 - r.next_f64();
    let u2 = r.next_f64();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn days(spec: &DemoSpec) -> Vec<NaiveDate> {
    let n = (spec.end - spec.start).num_days() + 1;
    (0..n).map(|i| spec.start + Duration::days(i)).collect()
}

fn is_weekday(d: NaiveDate) -> bool {
    !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
}

fn write_series(path: &Path, rows: impl IntoIterator<Item = (NaiveDate, f64)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["Date", "Value"])?;
    for (d, v) in rows {
        w.write_record([d.format(DATE_FORMAT).to_string(), format!("{v:.6}")])?;
    }
    w.flush()?;
    Ok(())
}

/// AR(1) around `mean` on weekdays.
fn ar1(dates: &[NaiveDate], mean: f64, phi: f64, sd: f64, r: &mut CounterRng) -> Vec<(NaiveDate, f64)> {
    let mut x = mean;
    dates
        .iter()
        .filter(|d| is_weekday(**d))
        .map(|d| {
            x = mean + phi * (x - mean) + sd * normal(r);
            (*d, x)
        })
        .collect()
}

/// Writes `tokens/`, `macro/`, `fgi.csv`, `riskfree.csv`, `stationarity.csv`
/// and a `run.json` using them into `dir`.
pub fn write_demo(dir: &Path, spec: &DemoSpec) -> Result<()> {
    let key = StreamKey::new(spec.seed);
    let dates = days(spec);
    let tokens = dir.join("tokens");
    let macro_dir = dir.join("macro");
    fs::create_dir_all(&tokens)?;
    fs::create_dir_all(&macro_dir)?;

    let mut symbols = vec!["BTC".to_string()];
    symbols.extend((1..spec.tokens).map(|i| format!("TK{i}")));
    symbols.truncate(spec.tokens.max(1));
    for (i, sym) in symbols.iter().enumerate() {
        let mut r = key.child_str("token").child(i as u64).rng();
        let mut close = 100.0 * (1.0 + i as f64);
        let mut w = csv::Writer::from_path(tokens.join(format!("{sym}.csv")))?;
        w.write_record(["Date", "High", "Low", "Close", "Volume"])?;
        for d in &dates {
            close *= (0.0004 + 0.035 * normal(&mut r)).exp();
            let high = close * (1.0 + 0.02 * normal(&mut r).abs());
            let low = close * (1.0 - 0.02 * normal(&mut r).abs()).max(0.5);
            let volume = 5e6 * (0.5 * normal(&mut r)).exp();
            w.write_record([
                d.format(DATE_FORMAT).to_string(),
                format!("{high:.6}"),
                format!("{low:.6}"),
                format!("{close:.6}"),
                format!("{volume:.2}"),
            ])?;
        }
        w.flush()?;
    }

    let mut r = key.child_str("macro").rng();
    let mut level = 2.0;
    let dgs10: Vec<_> = dates
        .iter()
        .filter(|d| is_weekday(**d))
        .map(|d| {
            level += 0.04 * normal(&mut r);
            (*d, level)
        })
        .collect();
    write_series(&macro_dir.join("DGS10.csv"), dgs10)?;
    write_series(&macro_dir.join("VIXCLS.csv"), ar1(&dates, 20.0, 0.97, 1.5, &mut r))?;
    let fgi: Vec<_> = ar1(&dates, 50.0, 0.95, 6.0, &mut r)
        .into_iter()
        .map(|(d, v)| (d, v.clamp(0.0, 100.0)))
        .collect();
    write_series(&dir.join("fgi.csv"), fgi)?;
    let rf: Vec<_> = ar1(&dates, 2.5, 0.999, 0.02, &mut r)
        .into_iter()
        .map(|(d, v)| (d, v.max(0.0)))
        .collect();
    write_series(&dir.join("riskfree.csv"), rf)?;

    let mut st = csv::Writer::from_path(dir.join("stationarity.csv"))?;
    st.write_record(["series", "spec", "dfgls_p", "kpss_p", "za_p"])?;
    let mut rows: Vec<(String, bool)> = [("DGS10", false), ("VIXCLS", true), ("FGI", true), ("BTC", true)]
        .into_iter()
        .map(|(s, b)| (s.to_string(), b))
        .collect();
    for kind in TargetKind::ALL {
        rows.extend(HORIZONS.iter().map(|h| (format!("{kind}@{h}"), true)));
    }
    for (series, stationary) in &rows {
        for s in ["c", "ct"] {
            let series = series.as_str();
            let (dfgls, kpss, za) = if *stationary { ("0.01", "0.40", "0.02") } else { ("0.60", "0.01", "0.50") };
            st.write_record([series, s, dfgls, kpss, za])?;
        }
    }
    st.flush()?;

    let config = json!({
        "paths": {
            "tokens": "tokens",
            "macro_dir": "macro",
            "fgi": "fgi.csv",
            "riskfree": "riskfree.csv",
            "stationarity": "stationarity.csv",
            "output": "out"
        },
        "baskets": {"ALL": "ALL"},
        "n_per_interval": 10000,
        "fee": 0.001,
        "seeds": {"simulate": 42, "select": 7, "irf": 9},
        "cleaning": {
            "min_first_date_cutoff": "2024-01-01",
            "min_latest_date": spec.end.format(DATE_FORMAT).to_string()
        },
        "selection": {"bootstrap": 100},
        "irf": {"lambda": 1.0, "bootstrap": 199}
    });
    fs::write(dir.join("run.json"), serde_json::to_string_pretty(&config)? + "\n")?;
    Ok(())
}

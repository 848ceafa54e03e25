//! Long-format weekly tables passed between the metrics and feature stages.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use hodl_core::panel::{parse_date, DATE_FORMAT};
use hodl_core::{TargetKind, WeeklySeries};

pub type BasketTargets = BTreeMap<String, BTreeMap<(u32, TargetKind), WeeklySeries>>;

fn kind_from_name(s: &str) -> Option<TargetKind> {
    TargetKind::ALL.into_iter().find(|k| k.name() == s)
}

/// `basket,horizon,target,week,value`
pub fn write_weekly_targets(path: &Path, targets: &BasketTargets) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["basket", "horizon", "target", "week", "value"])?;
    for (basket, series) in targets {
        for ((h, kind), s) in series {
            for (d, v) in s.mondays.iter().zip(&s.values) {
                w.write_record([
                    basket.clone(),
                    h.to_string(),
                    kind.name().to_string(),
                    d.format(DATE_FORMAT).to_string(),
                    v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_weekly_targets(path: &Path) -> Result<BasketTargets> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out: BasketTargets = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = || anyhow!("{}: malformed row {}", path.display(), i + 1);
        let h: u32 = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let kind = rec.get(2).and_then(kind_from_name).ok_or_else(bad)?;
        let d = rec.get(3).and_then(parse_date).ok_or_else(bad)?;
        let v: f64 = rec.get(4).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let s = out.entry(rec[0].to_string()).or_default().entry((h, kind)).or_default();
        s.mondays.push(d);
        s.values.push(v);
    }
    Ok(out)
}

/// `series,week,value`
pub fn write_weekly_macro(path: &Path, macros: &BTreeMap<String, WeeklySeries>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["series", "week", "value"])?;
    for (name, s) in macros {
        for (d, v) in s.mondays.iter().zip(&s.values) {
            w.write_record([name.clone(), d.format(DATE_FORMAT).to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_weekly_macro(path: &Path) -> Result<BTreeMap<String, WeeklySeries>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out: BTreeMap<String, WeeklySeries> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = || anyhow!("{}: malformed row {}", path.display(), i + 1);
        let d = rec.get(1).and_then(parse_date).ok_or_else(bad)?;
        let v: f64 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let s = out.entry(rec[0].to_string()).or_default();
        s.mondays.push(d);
        s.values.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    #[test]
    fn tables_round_trip() {
        let m = |d| NaiveDate::from_ymd_opt(2024, 1, d).unwrap();
        let s = WeeklySeries {
            mondays: vec![m(1), m(8), m(22)],
            values: vec![0.1, -2.5e-7, 3.0],
        };
        let mut targets = BasketTargets::new();
        targets.entry("L1".into()).or_default().insert((30, TargetKind::Cvar10), s.clone());
        targets.entry("L1".into()).or_default().insert((90, TargetKind::Sharpe), s.clone());
        let macros: BTreeMap<String, WeeklySeries> = [("FGI".to_string(), s)].into();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("t.csv"), dir.path().join("m.csv"));
        write_weekly_targets(&a, &targets).unwrap();
        write_weekly_macro(&b, &macros).unwrap();
        assert_eq!(read_weekly_targets(&a).unwrap(), targets);
        assert_eq!(read_weekly_macro(&b).unwrap(), macros);
    }
}

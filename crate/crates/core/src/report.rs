//! Risk–return bubble charts as SVG, each with a CSV of the plotted values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricSet, OverallRow};

pub const AREA_FLOOR: f64 = 400.0;
pub const AREA_CEILING: f64 = 2800.0;

/// `min(max(400 (1 + 1.5 z), 400), 2800)`; an undefined `z` gives the floor.
pub fn bubble_area(z: Option<f64>) -> f64 {
    match z {
        Some(z) if z.is_finite() => (AREA_FLOOR * (1.0 + 1.5 * z)).max(AREA_FLOOR).min(AREA_CEILING),
        _ => AREA_FLOOR,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartLayout {
    /// CVaR 1% against Sharpe, sized by probability of a loss beyond 10%.
    TailRisk,
    /// Median against top-quartile mean, sized by IQR.
    Upside,
}

impl ChartLayout {
    fn axes(self) -> (&'static str, &'static str, &'static str) {
        match self {
            ChartLayout::TailRisk => ("cvar", "sharpe", "p_sig_loss"),
            ChartLayout::Upside => ("median", "top25_mean", "iqr"),
        }
    }

    fn values(self, m: &MetricSet) -> (f64, Option<f64>, f64) {
        match self {
            ChartLayout::TailRisk => (m.cvar, m.sharpe, m.p_sig_loss),
            ChartLayout::Upside => (m.median, Some(m.top25_mean), m.iqr),
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            ChartLayout::TailRisk => "tail_risk",
            ChartLayout::Upside => "upside",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub basket: String,
    pub interval: String,
    pub x: f64,
    pub y: f64,
    pub size_value: f64,
    pub z: Option<f64>,
    pub area: f64,
}

/// Bubbles for the per-interval rows of `rows`, with sizes standardized
/// within each basket (sample std). Rows with an undefined y value are skipped.
pub fn bubbles(rows: &[OverallRow], layout: ChartLayout) -> Vec<Bubble> {
    let mut out = Vec::new();
    let mut baskets: Vec<&str> = rows.iter().map(|r| r.basket.as_str()).collect();
    baskets.dedup();
    for b in baskets {
        let pts: Vec<(String, f64, f64, f64)> = rows
            .iter()
            .filter(|r| r.basket == b)
            .filter_map(|r| {
                let iv = r.interval?;
                let (x, y, s) = layout.values(&r.metrics);
                Some((iv.label(), x, y?, s))
            })
            .collect();
        let n = pts.len() as f64;
        let mean = pts.iter().map(|p| p.3).sum::<f64>() / n;
        let sd = if pts.len() > 1 {
            (pts.iter().map(|p| (p.3 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        for (label, x, y, s) in pts {
            let z = (sd > 0.0).then(|| (s - mean) / sd);
            out.push(Bubble {
                basket: b.to_string(),
                interval: label,
                x,
                y,
                size_value: s,
                z,
                area: bubble_area(z),
            });
        }
    }
    out
}

const W: f64 = 800.0;
const H: f64 = 600.0;
const PAD: f64 = 70.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn span(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.08 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

/// Renders bubbles as a standalone SVG. Bubble area is in square pixels.
pub fn render_svg(bubbles: &[Bubble], layout: ChartLayout) -> String {
    let (xl, yl, sl) = layout.axes();
    let (x0, x1) = span(bubbles.iter().map(|b| b.x));
    let (y0, y1) = span(bubbles.iter().map(|b| b.y));
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{0}" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xl}</text>"#, W / 2.0, H - 20.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{yl}</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle">bubble area: {sl}</text>"#, W / 2.0);
    for t in [0.0, 0.5, 1.0] {
        let xv = x0 + t * (x1 - x0);
        let yv = y0 + t * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{xv:.3}</text><text x="{}" y="{:.1}" text-anchor="end">{yv:.3}</text>"#,
            px(xv),
            H - PAD + 16.0,
            PAD - 6.0,
            py(yv) + 4.0
        );
    }
    let mut baskets: Vec<&str> = bubbles.iter().map(|b| b.basket.as_str()).collect();
    baskets.dedup();
    for b in bubbles {
        let color = PALETTE[baskets.iter().position(|x| *x == b.basket).unwrap_or(0) % PALETTE.len()];
        let r = (b.area / std::f64::consts::PI).sqrt();
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r:.2}" fill="{color}" fill-opacity="0.45" stroke="{color}"><title>{} {}</title></circle>"#,
            px(b.x),
            py(b.y),
            b.basket,
            b.interval
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="9">{}</text>"#,
            px(b.x),
            py(b.y) + 3.0,
            b.interval
        );
    }
    for (i, b) in baskets.iter().enumerate() {
        let y = PAD + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{b}</text>"#,
            W - PAD - 90.0,
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            W - PAD - 75.0,
            y
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `{stem}.svg` and `{stem}.csv` into `dir`.
pub fn emit_bubble_chart(dir: &Path, stem: &str, rows: &[OverallRow], layout: ChartLayout) -> Result<Vec<Bubble>> {
    let bs = bubbles(rows, layout);
    if bs.is_empty() {
        return Err(Error::InvalidInput("bubble chart needs at least one basket-horizon row".into()));
    }
    let svg = dir.join(format!("{stem}.svg"));
    fs::write(&svg, render_svg(&bs, layout)).map_err(|e| Error::io(&svg, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let (xl, yl, sl) = layout.axes();
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::csv(&csv_path, e))?;
    w.write_record(["basket", "interval", xl, yl, sl, "z", "area"])
        .map_err(|e| Error::csv(&csv_path, e))?;
    for b in &bs {
        w.write_record([
            b.basket.clone(),
            b.interval.clone(),
            b.x.to_string(),
            b.y.to_string(),
            b.size_value.to_string(),
            b.z.map(|z| z.to_string()).unwrap_or_default(),
            b.area.to_string(),
        ])
        .map_err(|e| Error::csv(&csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok(bs)
}

/// Reads a chart CSV back into bubbles, enough to regenerate the SVG.
pub fn read_bubble_csv(path: &Path) -> Result<Vec<Bubble>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = || Error::Data(format!("{}: malformed row {}", path.display(), i + 1));
        let f = |j: usize| rec.get(j).and_then(|s| s.parse::<f64>().ok()).ok_or_else(bad);
        out.push(Bubble {
            basket: rec.get(0).ok_or_else(bad)?.to_string(),
            interval: rec.get(1).ok_or_else(bad)?.to_string(),
            x: f(2)?,
            y: f(3)?,
            size_value: f(4)?,
            z: rec.get(5).filter(|s| !s.is_empty()).map(|s| s.parse().map_err(|_| bad())).transpose()?,
            area: f(6)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{compute_metrics, Flavor};
    use crate::sim::HorizonInterval;

    #[test]
    fn area_pins() {
        assert_eq!(bubble_area(Some(0.0)), 400.0);
        assert_eq!(bubble_area(Some(1.0)), 1000.0);
        assert_eq!(bubble_area(Some(10.0)), 2800.0);
        assert_eq!(bubble_area(Some(-3.0)), 400.0);
        assert_eq!(bubble_area(None), 400.0);
    }

    #[test]
    fn chart_round_trips_through_csv() {
        let rows: Vec<OverallRow> = HorizonInterval::CANONICAL[..3]
            .iter()
            .enumerate()
            .map(|(i, iv)| OverallRow {
                basket: "ETH".into(),
                interval: Some(*iv),
                metrics: compute_metrics(
                    &(0..20).map(|j| (j as f64 - 8.0 + i as f64) * 0.05 * (i + 1) as f64).collect::<Vec<_>>(),
                    0.01,
                    Flavor::Overall,
                )
                .unwrap(),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let bs = emit_bubble_chart(dir.path(), "fig", &rows, ChartLayout::TailRisk).unwrap();
        let back = read_bubble_csv(&dir.path().join("fig.csv")).unwrap();
        assert_eq!(back, bs);
        let svg = fs::read_to_string(dir.path().join("fig.svg")).unwrap();
        assert_eq!(svg, render_svg(&back, ChartLayout::TailRisk));

        let single = bubbles(&rows[..1], ChartLayout::Upside);
        assert_eq!(single[0].area, 400.0);
        assert_eq!(single[0].z, None);
    }
}

//! Daily OHLCV token panels, cleaning rules and weekly macro alignment.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Monday that starts the ISO week containing `date`.
pub fn week_monday(date: NaiveDate) -> NaiveDate {
    date - Duration::days(i64::from(date.weekday().num_days_from_monday()))
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    // Accept a trailing time component ("2024-01-01 00:00:00+00:00").
    let head = s.get(..10).unwrap_or(s);
    NaiveDate::parse_from_str(head, DATE_FORMAT).ok()
}

/// Per-token daily series on a contiguous calendar. Missing cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenPanel {
    pub symbol: String,
    pub dates: Vec<NaiveDate>,
    pub high: Vec<f64>,
    pub low: Vec<f64>,
    pub close: Vec<f64>,
    pub volume: Vec<f64>,
    /// 1-based data-row indices of the source file that held unparseable cells.
    pub flagged_rows: Vec<usize>,
}

impl TokenPanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    fn row_complete(&self, i: usize) -> bool {
        self.high[i].is_finite()
            && self.low[i].is_finite()
            && self.close[i].is_finite()
            && self.volume[i].is_finite()
    }

    fn row_any(&self, i: usize) -> bool {
        self.high[i].is_finite()
            || self.low[i].is_finite()
            || self.close[i].is_finite()
            || self.volume[i].is_finite()
    }

    pub fn has_missing(&self) -> bool {
        (0..self.len()).any(|i| !self.row_complete(i))
    }

    fn first_observed(&self) -> Option<usize> {
        (0..self.len()).find(|&i| self.row_any(i))
    }

    fn last_observed(&self) -> Option<usize> {
        (0..self.len()).rev().find(|&i| self.row_any(i))
    }

    fn slice(&self, start: usize) -> TokenPanel {
        TokenPanel {
            symbol: self.symbol.clone(),
            dates: self.dates[start..].to_vec(),
            high: self.high[start..].to_vec(),
            low: self.low[start..].to_vec(),
            close: self.close[start..].to_vec(),
            volume: self.volume[start..].to_vec(),
            flagged_rows: self.flagged_rows.clone(),
        }
    }

    pub fn close_at(&self, date: NaiveDate) -> Option<f64> {
        let first = *self.dates.first()?;
        let idx = (date - first).num_days();
        if idx < 0 {
            return None;
        }
        self.close.get(idx as usize).copied().filter(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestWarning {
    pub symbol: Option<String>,
    pub row: Option<usize>,
    pub message: String,
}

impl IngestWarning {
    fn token(symbol: &str, row: Option<usize>, message: impl Into<String>) -> Self {
        IngestWarning {
            symbol: Some(symbol.to_string()),
            row,
            message: message.into(),
        }
    }
}

/// Token panels sorted by symbol, plus non-fatal loading warnings.
#[derive(Debug, Clone, Default)]
pub struct PanelSet {
    pub panels: Vec<TokenPanel>,
    pub warnings: Vec<IngestWarning>,
}

impl PanelSet {
    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn get(&self, symbol: &str) -> Option<&TokenPanel> {
        self.panels.iter().find(|p| p.symbol == symbol)
    }

    pub fn symbols(&self) -> Vec<String> {
        self.panels.iter().map(|p| p.symbol.clone()).collect()
    }
}

struct RawRow {
    date: NaiveDate,
    fields: [f64; 4],
}

fn parse_cell(raw: Option<&str>) -> (f64, bool) {
    match raw.map(str::trim) {
        None | Some("") => (f64::NAN, false),
        Some(s) if s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("null") => {
            (f64::NAN, false)
        }
        Some(s) => match s.parse::<f64>() {
            Ok(v) if v.is_finite() => (v, false),
            _ => (f64::NAN, true),
        },
    }
}

/// Parses one `Date,High,Low,Close,Volume` file into a panel on a contiguous
/// daily calendar. Row-level problems become warnings.
pub fn load_token_csv(path: &Path) -> Result<(TokenPanel, Vec<IngestWarning>)> {
    let symbol = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidInput(format!("bad file name {}", path.display())))?
        .to_string();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Data(format!("{}: missing column {name}", path.display())))
    };
    let (c_date, c_high, c_low, c_close, c_vol) =
        (col("Date")?, col("High")?, col("Low")?, col("Close")?, col("Volume")?);

    let mut warnings = Vec::new();
    let mut flagged = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row_no = i + 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                warnings.push(IngestWarning::token(&symbol, Some(row_no), format!("unreadable row: {e}")));
                continue;
            }
        };
        let Some(date) = rec.get(c_date).and_then(parse_date) else {
            warnings.push(IngestWarning::token(&symbol, Some(row_no), "unparseable date; row skipped"));
            continue;
        };
        let mut fields = [0.0; 4];
        let mut bad = false;
        for (slot, c) in fields.iter_mut().zip([c_high, c_low, c_close, c_vol]) {
            let (v, malformed) = parse_cell(rec.get(c));
            *slot = v;
            bad |= malformed;
        }
        if bad {
            flagged.push(row_no);
            warnings.push(IngestWarning::token(&symbol, Some(row_no), "non-numeric value flagged missing"));
        }
        rows.push(RawRow { date, fields });
    }

    rows.sort_by_key(|r| r.date);
    let mut dedup: Vec<RawRow> = Vec::with_capacity(rows.len());
    for r in rows {
        if dedup.last().is_some_and(|l| l.date == r.date) {
            warnings.push(IngestWarning::token(&symbol, None, format!("duplicate date {}; first kept", r.date)));
            continue;
        }
        dedup.push(r);
    }

    let mut panel = TokenPanel {
        symbol,
        dates: Vec::new(),
        high: Vec::new(),
        low: Vec::new(),
        close: Vec::new(),
        volume: Vec::new(),
        flagged_rows: flagged,
    };
    if let (Some(first), Some(last)) = (dedup.first(), dedup.last()) {
        let n = (last.date - first.date).num_days() as usize + 1;
        let start = first.date;
        panel.dates = (0..n).map(|d| start + Duration::days(d as i64)).collect();
        panel.high = vec![f64::NAN; n];
        panel.low = vec![f64::NAN; n];
        panel.close = vec![f64::NAN; n];
        panel.volume = vec![f64::NAN; n];
        for r in &dedup {
            let i = (r.date - start).num_days() as usize;
            panel.high[i] = r.fields[0];
            panel.low[i] = r.fields[1];
            panel.close[i] = r.fields[2];
            panel.volume[i] = r.fields[3];
        }
    }
    Ok((panel, warnings))
}

/// Loads every `*.csv` in `dir`, one token per file.
pub fn load_panel_set(dir: &Path) -> Result<PanelSet> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    paths.sort();

    let loaded: Vec<_> = paths.par_iter().map(|p| (p, load_token_csv(p))).collect();
    let mut set = PanelSet::default();
    for (path, res) in loaded {
        match res {
            Ok((panel, w)) => {
                set.warnings.extend(w);
                set.panels.push(panel);
            }
            Err(e) => set.warnings.push(IngestWarning {
                symbol: path.file_stem().and_then(|s| s.to_str()).map(String::from),
                row: None,
                message: format!("token not loaded: {e}"),
            }),
        }
    }
    if set.panels.is_empty() && set.warnings.is_empty() {
        set.warnings.push(IngestWarning {
            symbol: None,
            row: None,
            message: format!("no token files in {}", dir.display()),
        });
    }
    set.panels.sort_by(|a, b| a.symbol.cmp(&b.symbol));
    Ok(set)
}

pub fn write_token_csv(path: &Path, panel: &TokenPanel) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let cell = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
    w.write_record(["Date", "High", "Low", "Close", "Volume"])
        .map_err(|e| Error::csv(path, e))?;
    for i in 0..panel.len() {
        w.write_record([
            panel.dates[i].format(DATE_FORMAT).to_string(),
            cell(panel.high[i]),
            cell(panel.low[i]),
            cell(panel.close[i]),
            cell(panel.volume[i]),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningRules {
    pub min_first_date_cutoff: NaiveDate,
    pub stablecoin_close_band: [f64; 2],
    pub stablecoin_close_std_max: f64,
    pub min_avg_volume_usd: f64,
    pub volume_window_days: i64,
    pub min_latest_date: NaiveDate,
    pub quality_zero_days_max: usize,
    pub quality_tiny_volume_usd: f64,
}

impl Default for CleaningRules {
    fn default() -> Self {
        CleaningRules {
            min_first_date_cutoff: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            stablecoin_close_band: [0.97, 1.03],
            stablecoin_close_std_max: 0.03,
            min_avg_volume_usd: 100_000.0,
            volume_window_days: 365,
            min_latest_date: NaiveDate::from_ymd_opt(2025, 4, 26).unwrap(),
            quality_zero_days_max: 10,
            quality_tiny_volume_usd: 500.0,
        }
    }
}

impl CleaningRules {
    pub fn validate(&self) -> Result<()> {
        let nums = [
            self.stablecoin_close_band[0],
            self.stablecoin_close_band[1],
            self.stablecoin_close_std_max,
            self.min_avg_volume_usd,
            self.quality_tiny_volume_usd,
        ];
        if nums.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("cleaning thresholds must be finite and nonnegative".into()));
        }
        if self.stablecoin_close_band[0] >= self.stablecoin_close_band[1] {
            return Err(Error::InvalidInput("stablecoin band lower bound must be below upper".into()));
        }
        if self.volume_window_days < 1 {
            return Err(Error::InvalidInput("volume window must be at least one day".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    FirstDateCutoff,
    Stablecoin,
    MinAvgVolume,
    LatestDateCutoff,
    MissingValues,
    QualityScreen,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::FirstDateCutoff => "first_date_cutoff",
            ExclusionReason::Stablecoin => "stablecoin",
            ExclusionReason::MinAvgVolume => "min_avg_volume",
            ExclusionReason::LatestDateCutoff => "latest_date_cutoff",
            ExclusionReason::MissingValues => "missing_values",
            ExclusionReason::QualityScreen => "quality_screen",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CleaningOutcome {
    pub panels: PanelSet,
    pub exclusions: BTreeMap<String, ExclusionReason>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Stablecoin test on the observed closes: mean inside the band and sample
/// standard deviation at most the cap. Returns `(is_stable, warning)`.
pub fn detect_stablecoin_with(panel: &TokenPanel, rules: &CleaningRules) -> (bool, Option<IngestWarning>) {
    let closes: Vec<f64> = panel.close.iter().copied().filter(|v| v.is_finite()).collect();
    if closes.len() < 2 {
        let w = IngestWarning::token(
            &panel.symbol,
            None,
            "fewer than 2 close observations; stablecoin test not applicable",
        );
        return (false, Some(w));
    }
    let (mean, std) = mean_std(&closes);
    let [lo, hi] = rules.stablecoin_close_band;
    (mean >= lo && mean <= hi && std <= rules.stablecoin_close_std_max, None)
}

pub fn detect_stablecoin(panel: &TokenPanel) -> bool {
    detect_stablecoin_with(panel, &CleaningRules::default()).0
}

fn first_failing_rule(
    panel: &TokenPanel,
    rules: &CleaningRules,
    warnings: &mut Vec<IngestWarning>,
) -> std::result::Result<TokenPanel, ExclusionReason> {
    let (Some(first), Some(last)) = (panel.first_observed(), panel.last_observed()) else {
        return Err(ExclusionReason::MissingValues);
    };
    if panel.dates[first] >= rules.min_first_date_cutoff {
        return Err(ExclusionReason::FirstDateCutoff);
    }

    let (stable, warn) = detect_stablecoin_with(panel, rules);
    warnings.extend(warn);
    if stable {
        return Err(ExclusionReason::Stablecoin);
    }

    let last_date = panel.dates[last];
    let window_start = last_date - Duration::days(rules.volume_window_days - 1);
    let vols: Vec<f64> = (0..panel.len())
        .filter(|&i| panel.dates[i] >= window_start && panel.dates[i] <= last_date)
        .map(|i| panel.volume[i])
        .filter(|v| v.is_finite())
        .collect();
    let avg = if vols.is_empty() {
        f64::NAN
    } else {
        vols.iter().sum::<f64>() / vols.len() as f64
    };
    if !(avg >= rules.min_avg_volume_usd) {
        return Err(ExclusionReason::MinAvgVolume);
    }

    if last_date < rules.min_latest_date {
        return Err(ExclusionReason::LatestDateCutoff);
    }

    let Some(start) = (0..panel.len()).find(|&i| panel.row_complete(i)) else {
        return Err(ExclusionReason::MissingValues);
    };
    let trimmed = panel.slice(start);
    if trimmed.has_missing() {
        return Err(ExclusionReason::MissingValues);
    }

    let zero_days = (0..trimmed.len())
        .filter(|&i| trimmed.high[i] == 0.0 || trimmed.volume[i] == 0.0)
        .count();
    let tiny_days = trimmed
        .volume
        .iter()
        .filter(|&&v| v < rules.quality_tiny_volume_usd)
        .count();
    if zero_days >= rules.quality_zero_days_max || tiny_days >= rules.quality_zero_days_max {
        return Err(ExclusionReason::QualityScreen);
    }
    Ok(trimmed)
}

/// Applies the cleaning rules in their fixed order and records the first
/// rule that removed each excluded token.
pub fn apply_cleaning_rules(set: &PanelSet, rules: &CleaningRules) -> CleaningOutcome {
    let results: Vec<_> = set
        .panels
        .par_iter()
        .map(|p| {
            let mut warnings = Vec::new();
            let r = first_failing_rule(p, rules, &mut warnings);
            (p.symbol.clone(), r, warnings)
        })
        .collect();

    let mut out = CleaningOutcome::default();
    out.panels.warnings = set.warnings.clone();
    for (symbol, r, w) in results {
        out.panels.warnings.extend(w);
        match r {
            Ok(panel) => out.panels.panels.push(panel),
            Err(reason) => {
                out.exclusions.insert(symbol, reason);
            }
        }
    }
    out
}

/// Weekly series stamped on Mondays. Mondays are strictly increasing and
/// whole weeks apart; weeks without a value are absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeeklySeries {
    pub mondays: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl WeeklySeries {
    pub fn len(&self) -> usize {
        self.mondays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mondays.is_empty()
    }

    pub fn get(&self, monday: NaiveDate) -> Option<f64> {
        self.mondays
            .binary_search(&monday)
            .ok()
            .map(|i| self.values[i])
    }

    fn from_map(map: BTreeMap<NaiveDate, f64>) -> Self {
        let (mondays, values) = map.into_iter().unzip();
        WeeklySeries { mondays, values }
    }
}

/// Dated daily observations (macro series, yields, sentiment).
pub type DailySeries = Vec<(NaiveDate, f64)>;

/// Reads a two-column `Date,Value` file. Non-numeric values (FRED writes
/// `.` for holidays) are skipped.
pub fn load_daily_series(path: &Path) -> Result<DailySeries> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let (Some(d), Some(v)) = (rec.get(0).and_then(parse_date), rec.get(1)) else {
            continue;
        };
        if let Ok(v) = v.trim().parse::<f64>() {
            if v.is_finite() {
                out.push((d, v));
            }
        }
    }
    out.sort_by_key(|(d, _)| *d);
    out.dedup_by_key(|(d, _)| *d);
    Ok(out)
}

/// Friday's value of each Monday–Sunday week, or Thursday's when Friday is
/// missing, stamped on the week's Monday.
pub fn weekly_align_macro(daily: &[(NaiveDate, f64)]) -> WeeklySeries {
    let mut weeks: BTreeMap<NaiveDate, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for &(d, v) in daily {
        if !v.is_finite() {
            continue;
        }
        let slot = weeks.entry(week_monday(d)).or_default();
        match d.weekday() {
            Weekday::Fri => slot.0 = Some(v),
            Weekday::Thu => slot.1 = Some(v),
            _ => {}
        }
    }
    WeeklySeries::from_map(
        weeks
            .into_iter()
            .filter_map(|(m, (fri, thu))| fri.or(thu).map(|v| (m, v)))
            .collect(),
    )
}

/// Monday–Sunday arithmetic mean of the available days.
pub fn weekly_fgi_mean(daily: &[(NaiveDate, f64)]) -> WeeklySeries {
    let mut acc: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for &(d, v) in daily {
        if v.is_finite() {
            let e = acc.entry(week_monday(d)).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    WeeklySeries::from_map(acc.into_iter().map(|(m, (s, n))| (m, s / n as f64)).collect())
}

/// Week-over-week log return of the last available close of each week,
/// stamped on the Monday of the later week. Weeks whose predecessor week has
/// no close are skipped.
pub fn btc_weekly_log_return(panel: &TokenPanel) -> Result<WeeklySeries> {
    let mut closes: BTreeMap<NaiveDate, (NaiveDate, f64)> = BTreeMap::new();
    for (i, &d) in panel.dates.iter().enumerate() {
        let c = panel.close[i];
        if !c.is_finite() {
            continue;
        }
        let e = closes.entry(week_monday(d)).or_insert((d, c));
        if d >= e.0 {
            *e = (d, c);
        }
    }
    let mut out = BTreeMap::new();
    let mut prev: Option<(NaiveDate, f64)> = None;
    for (monday, (day, close)) in closes {
        if close <= 0.0 {
            return Err(Error::Data(format!(
                "{}: nonpositive close {close} on {day}",
                panel.symbol
            )));
        }
        if let Some((pm, pc)) = prev {
            if monday - pm == Duration::days(7) {
                out.insert(monday, (close / pc).ln());
            }
        }
        prev = Some((monday, close));
    }
    Ok(WeeklySeries::from_map(out))
}

//! Buy–hold–sell episode simulator.
//!
//! Each attempt draws a holding horizon, a buy/sell day pair and a coin,
//! checks the sampled days against the validity filter, then prices the
//! trade at a uniform point inside each day's low–high band. Attempt `i` of
//! a batch uses the random stream keyed by `(seed, basket, interval, i)`;
//! attempts are evaluated in parallel chunks and then scanned in ordinal
//! order, so the stopping rule (target count reached, or too many
//! consecutive failures) sees the same sequence on any number of threads.

use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{TokenPanel, DATE_FORMAT};
use crate::rng::{CounterRng, StreamKey};

/// Inclusive range of holding days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HorizonInterval {
    pub lower: u32,
    pub upper: u32,
}

impl HorizonInterval {
    pub const CANONICAL: [HorizonInterval; 6] = [
        HorizonInterval { lower: 1, upper: 30 },
        HorizonInterval { lower: 31, upper: 90 },
        HorizonInterval { lower: 91, upper: 180 },
        HorizonInterval { lower: 181, upper: 365 },
        HorizonInterval { lower: 366, upper: 730 },
        HorizonInterval { lower: 731, upper: 1095 },
    ];

    pub fn new(lower: u32, upper: u32) -> Result<Self> {
        if lower < 1 || lower > upper {
            return Err(Error::InvalidInput(format!(
                "horizon interval needs 1 <= lower <= upper, got {lower}-{upper}"
            )));
        }
        Ok(HorizonInterval { lower, upper })
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.lower, self.upper)
    }
}

impl fmt::Display for HorizonInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lower, self.upper)
    }
}

impl FromStr for HorizonInterval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| Error::InvalidInput(format!("interval {s:?} is not LOWER-UPPER")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidInput(format!("interval {s:?} is not LOWER-UPPER")))
        };
        HorizonInterval::new(parse(a)?, parse(b)?)
    }
}

/// High/low prices of a basket's coins on one shared daily calendar.
/// Days outside a coin's history are NaN and fail the validity filter.
#[derive(Debug, Clone)]
pub struct BasketPanel {
    pub name: String,
    pub symbols: Vec<String>,
    pub start: NaiveDate,
    days: usize,
    high: Vec<f64>,
    low: Vec<f64>,
}

impl BasketPanel {
    pub fn from_panels(name: &str, panels: &[&TokenPanel]) -> Result<Self> {
        let nonempty: Vec<&&TokenPanel> = panels.iter().filter(|p| !p.is_empty()).collect();
        if nonempty.is_empty() {
            return Err(Error::InvalidInput(format!("basket {name} has no price data")));
        }
        let start = nonempty.iter().map(|p| p.dates[0]).min().unwrap();
        let end = nonempty.iter().map(|p| *p.dates.last().unwrap()).max().unwrap();
        let days = (end - start).num_days() as usize + 1;
        let coins = nonempty.len();
        let mut high = vec![f64::NAN; coins * days];
        let mut low = vec![f64::NAN; coins * days];
        for (c, p) in nonempty.iter().enumerate() {
            let off = (p.dates[0] - start).num_days() as usize;
            let base = c * days + off;
            high[base..base + p.len()].copy_from_slice(&p.high);
            low[base..base + p.len()].copy_from_slice(&p.low);
        }
        Ok(BasketPanel {
            name: name.to_string(),
            symbols: nonempty.iter().map(|p| p.symbol.clone()).collect(),
            start,
            days,
            high,
            low,
        })
    }

    /// Builds a panel directly from per-coin high/low columns starting on `start`.
    pub fn from_columns(name: &str, start: NaiveDate, symbols: Vec<String>, high: Vec<Vec<f64>>, low: Vec<Vec<f64>>) -> Result<Self> {
        let days = high.first().map_or(0, Vec::len);
        if symbols.is_empty() || days == 0 || high.len() != symbols.len() || low.len() != symbols.len() {
            return Err(Error::InvalidInput("basket columns must be nonempty and match symbols".into()));
        }
        if high.iter().chain(low.iter()).any(|c| c.len() != days) {
            return Err(Error::InvalidInput("basket columns must share one length".into()));
        }
        Ok(BasketPanel {
            name: name.to_string(),
            symbols,
            start,
            days,
            high: high.concat(),
            low: low.concat(),
        })
    }

    pub fn coins(&self) -> usize {
        self.symbols.len()
    }

    /// Calendar length `T` in days.
    pub fn days(&self) -> usize {
        self.days
    }

    #[inline]
    pub fn high(&self, coin: usize, day: usize) -> f64 {
        self.high[coin * self.days + day]
    }

    #[inline]
    pub fn low(&self, coin: usize, day: usize) -> f64 {
        self.low[coin * self.days + day]
    }

    /// `H >= L > 0`, both observed.
    #[inline]
    pub fn is_valid(&self, coin: usize, day: usize) -> bool {
        let (h, l) = (self.high(coin, day), self.low(coin, day));
        l > 0.0 && h >= l
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start + Duration::days(day as i64)
    }
}

/// Cumulative log risk-free return per calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskFreeCurve {
    pub start: NaiveDate,
    gamma: Vec<f64>,
}

impl RiskFreeCurve {
    pub fn zero(start: NaiveDate, days: usize) -> Self {
        RiskFreeCurve {
            start,
            gamma: vec![0.0; days],
        }
    }

    /// `gamma_t = sum_{s<=t} ln(1 + r_s)` over daily simple rates.
    pub fn from_daily_rates(start: NaiveDate, rates: &[f64]) -> Self {
        let mut acc = 0.0;
        let gamma = rates
            .iter()
            .map(|r| {
                acc += r.ln_1p();
                acc
            })
            .collect();
        RiskFreeCurve { start, gamma }
    }

    /// Daily rates from annualized percent yields (`y / (100 * 365)`). The
    /// last quote is carried forward over unquoted days; days before the
    /// first quote take the first quote.
    pub fn from_annual_yields(quotes: &[(NaiveDate, f64)], start: NaiveDate, days: usize) -> Result<Self> {
        if quotes.is_empty() {
            return Err(Error::Data("risk-free series has no quotes".into()));
        }
        let mut rates = Vec::with_capacity(days);
        let mut q = 0usize;
        let mut current = quotes[0].1;
        for d in 0..days {
            let date = start + Duration::days(d as i64);
            while q < quotes.len() && quotes[q].0 <= date {
                current = quotes[q].1;
                q += 1;
            }
            rates.push(current / (100.0 * 365.0));
        }
        Ok(Self::from_daily_rates(start, &rates))
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// `exp(gamma_e - gamma_s) - 1` for days indexed on this curve.
    #[inline]
    pub fn holding_return(&self, buy: usize, sell: usize) -> f64 {
        (self.gamma[sell] - self.gamma[buy]).exp() - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub basket: String,
    pub interval: HorizonInterval,
    pub n: usize,
    pub fee: f64,
    pub seed: u64,
    pub max_consecutive_failures: usize,
}

impl SimConfig {
    pub fn new(basket: &str, interval: HorizonInterval, n: usize, seed: u64) -> Self {
        SimConfig {
            basket: basket.to_string(),
            interval,
            n,
            fee: 0.001,
            seed,
            max_consecutive_failures: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("episode count must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.fee) {
            return Err(Error::InvalidInput(format!("fee {} outside [0, 1)", self.fee)));
        }
        if self.max_consecutive_failures == 0 {
            return Err(Error::InvalidInput("max_consecutive_failures must be positive".into()));
        }
        HorizonInterval::new(self.interval.lower, self.interval.upper).map(|_| ())
    }
}

/// Coin and day indices of an attempt that passed the validity filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeSkeleton {
    pub coin: usize,
    pub buy_day: usize,
    pub sell_day: usize,
    pub holding_days: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Episode {
    pub coin: usize,
    pub buy_day: usize,
    pub sell_day: usize,
    pub holding_days: u32,
    pub buy_price: f64,
    pub sell_price: f64,
    pub net_return: f64,
    pub risk_free_return: f64,
    pub excess_return: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// `T - tau - 1 < 0`: no admissible buy day.
    Discarded,
    /// A sampled day failed `H >= L > 0`.
    Invalid,
}

/// Uniform integer holding period in `[lower, upper]`.
#[inline]
pub fn draw_horizon(interval: HorizonInterval, rng: &mut CounterRng) -> u32 {
    rng.uniform_inclusive(u64::from(interval.lower), u64::from(interval.upper)) as u32
}

/// Buy day uniform in `[0, T - tau - 1]`, sell day `buy + tau`.
#[inline]
pub fn draw_dates(days: usize, tau: u32, rng: &mut CounterRng) -> Option<(usize, usize)> {
    let tau = tau as usize;
    if tau + 1 > days {
        return None;
    }
    let last_buy = days - tau - 1;
    let s = rng.uniform_inclusive(0, last_buy as u64) as usize;
    Some((s, s + tau))
}

pub fn sample_valid_episode(
    panel: &BasketPanel,
    interval: HorizonInterval,
    rng: &mut CounterRng,
) -> std::result::Result<EpisodeSkeleton, Rejection> {
    let tau = draw_horizon(interval, rng);
    let (s, e) = draw_dates(panel.days(), tau, rng).ok_or(Rejection::Discarded)?;
    let coin = if panel.coins() == 1 { 0 } else { rng.index(panel.coins()) };
    if panel.is_valid(coin, s) && panel.is_valid(coin, e) {
        Ok(EpisodeSkeleton {
            coin,
            buy_day: s,
            sell_day: e,
            holding_days: tau,
        })
    } else {
        Err(Rejection::Invalid)
    }
}

/// Net return after a proportional fee on each side, `(1-f) r (1-f) - 1`.
/// Evaluated as `(r - 1) - r (2f - f^2)`, which avoids the cancellation
/// against 1 and is correctly rounded far more often.
#[inline]
pub fn net_return(buy_price: f64, sell_price: f64, fee: f64) -> f64 {
    let ratio = sell_price / buy_price;
    (ratio - 1.0) - ratio * (2.0 * fee - fee * fee)
}

/// Draws intra-day prices and computes net, risk-free and excess returns.
/// `curve_offset` is the curve index of the panel's day 0.
#[inline]
pub fn price_and_return(
    skel: EpisodeSkeleton,
    panel: &BasketPanel,
    curve: &RiskFreeCurve,
    curve_offset: usize,
    fee: f64,
    rng: &mut CounterRng,
) -> Episode {
    let (c, s, e) = (skel.coin, skel.buy_day, skel.sell_day);
    let u1 = rng.next_f64();
    let u2 = rng.next_f64();
    let (ls, hs) = (panel.low(c, s), panel.high(c, s));
    let (le, he) = (panel.low(c, e), panel.high(c, e));
    let buy_price = ls + u1 * (hs - ls);
    let sell_price = le + u2 * (he - le);
    let net = net_return(buy_price, sell_price, fee);
    let rf = curve.holding_return(s + curve_offset, e + curve_offset);
    Episode {
        coin: c,
        buy_day: s,
        sell_day: e,
        holding_days: skel.holding_days,
        buy_price,
        sell_price,
        net_return: net,
        risk_free_return: rf,
        excess_return: net - rf,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionStats {
    pub attempts: u64,
    pub accepted: u64,
    pub discarded: u64,
    pub invalid: u64,
    pub longest_failure_run: u64,
}

/// Columnar episode store for one (basket, interval).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeBatch {
    pub basket: String,
    pub interval: Option<HorizonInterval>,
    pub start: Option<NaiveDate>,
    pub symbols: Vec<String>,
    pub coin: Vec<u32>,
    pub buy_day: Vec<u32>,
    pub sell_day: Vec<u32>,
    pub holding_days: Vec<u32>,
    pub buy_price: Vec<f64>,
    pub sell_price: Vec<f64>,
    pub net_return: Vec<f64>,
    pub risk_free_return: Vec<f64>,
    pub excess_return: Vec<f64>,
    pub complete: bool,
    pub stats: RejectionStats,
}

impl EpisodeBatch {
    pub fn len(&self) -> usize {
        self.coin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coin.is_empty()
    }

    fn push(&mut self, ep: &Episode) {
        self.coin.push(ep.coin as u32);
        self.buy_day.push(ep.buy_day as u32);
        self.sell_day.push(ep.sell_day as u32);
        self.holding_days.push(ep.holding_days);
        self.buy_price.push(ep.buy_price);
        self.sell_price.push(ep.sell_price);
        self.net_return.push(ep.net_return);
        self.risk_free_return.push(ep.risk_free_return);
        self.excess_return.push(ep.excess_return);
    }

    pub fn episode(&self, i: usize) -> Episode {
        Episode {
            coin: self.coin[i] as usize,
            buy_day: self.buy_day[i] as usize,
            sell_day: self.sell_day[i] as usize,
            holding_days: self.holding_days[i],
            buy_price: self.buy_price[i],
            sell_price: self.sell_price[i],
            net_return: self.net_return[i],
            risk_free_return: self.risk_free_return[i],
            excess_return: self.excess_return[i],
        }
    }

    /// Calendar date of episode `i`'s sale.
    pub fn sell_date(&self, i: usize) -> Option<NaiveDate> {
        self.start.map(|s| s + Duration::days(i64::from(self.sell_day[i])))
    }
}

const MIN_CHUNK: usize = 1 << 10;
const MAX_CHUNK: usize = 1 << 16;

/// Collects up to `config.n` valid episodes. Stops early, with
/// `complete == false`, after `max_consecutive_failures` failed attempts in
/// a row (discards and invalid draws both count as failures).
pub fn simulate_batch(config: &SimConfig, panel: &BasketPanel, curve: &RiskFreeCurve) -> Result<EpisodeBatch> {
    config.validate()?;
    let offset = (panel.start - curve.start).num_days();
    if offset < 0 || offset as usize + panel.days() > curve.len() {
        return Err(Error::InvalidInput(format!(
            "risk-free curve ({} days from {}) does not cover basket {} ({} days from {})",
            curve.len(),
            curve.start,
            panel.name,
            panel.days(),
            panel.start
        )));
    }
    let offset = offset as usize;
    let key = StreamKey::new(config.seed)
        .child_str(&config.basket)
        .child(u64::from(config.interval.lower))
        .child(u64::from(config.interval.upper));

    let mut batch = EpisodeBatch {
        basket: config.basket.clone(),
        interval: Some(config.interval),
        start: Some(panel.start),
        symbols: panel.symbols.clone(),
        ..Default::default()
    };
    let reserve = config.n.min(1 << 24);
    for v in [&mut batch.coin, &mut batch.buy_day, &mut batch.sell_day, &mut batch.holding_days] {
        v.reserve(reserve);
    }
    for v in [
        &mut batch.buy_price,
        &mut batch.sell_price,
        &mut batch.net_return,
        &mut batch.risk_free_return,
        &mut batch.excess_return,
    ] {
        v.reserve(reserve);
    }

    let mut next_ordinal: u64 = 0;
    let mut run: u64 = 0;
    'outer: loop {
        let needed = config.n - batch.len();
        let chunk = (needed + needed / 4 + 64).clamp(MIN_CHUNK, MAX_CHUNK);
        let outcomes: Vec<std::result::Result<Episode, Rejection>> = (0..chunk)
            .into_par_iter()
            .with_min_len(256)
            .map(|j| {
                let ordinal = next_ordinal + j as u64;
                let mut rng = key.child(ordinal).rng();
                sample_valid_episode(panel, config.interval, &mut rng)
                    .map(|sk| price_and_return(sk, panel, curve, offset, config.fee, &mut rng))
            })
            .collect();
        next_ordinal += chunk as u64;

        for outcome in outcomes {
            batch.stats.attempts += 1;
            match outcome {
                Ok(ep) => {
                    batch.stats.accepted += 1;
                    run = 0;
                    batch.push(&ep);
                    if batch.len() == config.n {
                        batch.complete = true;
                        break 'outer;
                    }
                }
                Err(r) => {
                    match r {
                        Rejection::Discarded => batch.stats.discarded += 1,
                        Rejection::Invalid => batch.stats.invalid += 1,
                    }
                    run += 1;
                    batch.stats.longest_failure_run = batch.stats.longest_failure_run.max(run);
                    if run >= config.max_consecutive_failures as u64 {
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(batch)
}

const CSV_HEADER: [&str; 11] = [
    "coin",
    "symbol",
    "buy_day",
    "sell_day",
    "holding_days",
    "sell_date",
    "buy_price",
    "sell_price",
    "net_return",
    "risk_free_return",
    "excess_return",
];

/// On-disk episode layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeFormat {
    #[default]
    Csv,
    /// Little-endian columnar file, see [`write_batch_bin`].
    Bin,
}

impl EpisodeFormat {
    pub fn extension(self) -> &'static str {
        match self {
            EpisodeFormat::Csv => "csv",
            EpisodeFormat::Bin => "bin",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BinHeader {
    basket: String,
    interval: Option<HorizonInterval>,
    start: Option<NaiveDate>,
    symbols: Vec<String>,
    n: u64,
    complete: bool,
    stats: RejectionStats,
}

pub fn write_batch(path: &Path, batch: &EpisodeBatch, format: EpisodeFormat) -> Result<()> {
    match format {
        EpisodeFormat::Csv => write_batch_csv(path, batch),
        EpisodeFormat::Bin => write_batch_bin(path, batch),
    }
}

pub fn read_batch(path: &Path) -> Result<EpisodeBatch> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_batch_bin(path),
        _ => read_batch_csv(path),
    }
}

/// CSV with one row per episode. Floats use shortest round-trip formatting,
/// so re-reading is lossless.
pub fn write_batch_csv(path: &Path, batch: &EpisodeBatch) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::with_capacity(1 << 20, file));
    w.write_record(CSV_HEADER).map_err(|e| Error::csv(path, e))?;
    for i in 0..batch.len() {
        let sym = batch.symbols.get(batch.coin[i] as usize).map_or("", String::as_str);
        let date = batch
            .sell_date(i)
            .map(|d| d.format(DATE_FORMAT).to_string())
            .unwrap_or_default();
        w.write_record([
            batch.coin[i].to_string(),
            sym.to_string(),
            batch.buy_day[i].to_string(),
            batch.sell_day[i].to_string(),
            batch.holding_days[i].to_string(),
            date,
            batch.buy_price[i].to_string(),
            batch.sell_price[i].to_string(),
            batch.net_return[i].to_string(),
            batch.risk_free_return[i].to_string(),
            batch.excess_return[i].to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_batch_csv(path: &Path) -> Result<EpisodeBatch> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut batch = EpisodeBatch {
        complete: true,
        ..Default::default()
    };
    let bad = |what: &str, row: usize| Error::Data(format!("{}: bad {what} in row {row}", path.display()));
    let mut symbols: Vec<String> = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let u = |i: usize, what: &str| rec.get(i).and_then(|s| s.parse::<u32>().ok()).ok_or_else(|| bad(what, row + 1));
        let f = |i: usize, what: &str| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad(what, row + 1));
        let coin = u(0, "coin")?;
        if symbols.len() <= coin as usize {
            symbols.resize(coin as usize + 1, String::new());
        }
        if symbols[coin as usize].is_empty() {
            symbols[coin as usize] = rec.get(1).unwrap_or("").to_string();
        }
        let sell_day = u(3, "sell_day")?;
        if batch.start.is_none() {
            if let Some(d) = rec.get(5).and_then(crate::panel::parse_date) {
                batch.start = Some(d - Duration::days(i64::from(sell_day)));
            }
        }
        batch.coin.push(coin);
        batch.buy_day.push(u(2, "buy_day")?);
        batch.sell_day.push(sell_day);
        batch.holding_days.push(u(4, "holding_days")?);
        batch.buy_price.push(f(6, "buy_price")?);
        batch.sell_price.push(f(7, "sell_price")?);
        batch.net_return.push(f(8, "net_return")?);
        batch.risk_free_return.push(f(9, "risk_free_return")?);
        batch.excess_return.push(f(10, "excess_return")?);
    }
    batch.symbols = symbols;
    batch.stats.accepted = batch.len() as u64;
    Ok(batch)
}

const BIN_MAGIC: &[u8; 8] = b"HODLEP01";

/// Binary columnar layout:
///
/// ```text
/// magic "HODLEP01" | header_len: u32 | header: JSON (basket, interval, start,
/// symbols, n, complete, stats) | coin u32[n] | buy_day u32[n] | sell_day u32[n]
/// | holding_days u32[n] | buy_price f64[n] | sell_price f64[n]
/// | net_return f64[n] | risk_free_return f64[n] | excess_return f64[n]
/// ```
///
/// All integers and floats are little-endian.
pub fn write_batch_bin(path: &Path, batch: &EpisodeBatch) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    let header = BinHeader {
        basket: batch.basket.clone(),
        interval: batch.interval,
        start: batch.start,
        symbols: batch.symbols.clone(),
        n: batch.len() as u64,
        complete: batch.complete,
        stats: batch.stats,
    };
    let hjson = serde_json::to_vec(&header).map_err(|e| Error::json(path, e))?;
    let io = |e| Error::io(path, e);
    w.write_all(BIN_MAGIC).map_err(io)?;
    w.write_all(&(hjson.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&hjson).map_err(io)?;
    for col in [&batch.coin, &batch.buy_day, &batch.sell_day, &batch.holding_days] {
        for v in col.iter() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    for col in [
        &batch.buy_price,
        &batch.sell_price,
        &batch.net_return,
        &batch.risk_free_return,
        &batch.excess_return,
    ] {
        for v in col.iter() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_batch_bin(path: &Path) -> Result<EpisodeBatch> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != BIN_MAGIC {
        return Err(Error::Data(format!("{}: not an episode file", path.display())));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(io)?;
    let mut hjson = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut hjson).map_err(io)?;
    let header: BinHeader = serde_json::from_slice(&hjson).map_err(|e| Error::json(path, e))?;
    let n = header.n as usize;
    let read_u32 = |r: &mut BufReader<fs::File>| -> Result<Vec<u32>> {
        let mut buf = vec![0u8; n * 4];
        r.read_exact(&mut buf).map_err(io)?;
        Ok(buf.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let coin = read_u32(&mut r)?;
    let buy_day = read_u32(&mut r)?;
    let sell_day = read_u32(&mut r)?;
    let holding_days = read_u32(&mut r)?;
    let read_f64 = |r: &mut BufReader<fs::File>| -> Result<Vec<f64>> {
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    Ok(EpisodeBatch {
        basket: header.basket,
        interval: header.interval,
        start: header.start,
        symbols: header.symbols,
        coin,
        buy_day,
        sell_day,
        holding_days,
        buy_price: read_f64(&mut r)?,
        sell_price: read_f64(&mut r)?,
        net_return: read_f64(&mut r)?,
        risk_free_return: read_f64(&mut r)?,
        excess_return: read_f64(&mut r)?,
        complete: header.complete,
        stats: header.stats,
    })
}

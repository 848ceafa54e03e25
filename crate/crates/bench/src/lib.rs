//! Synthetic fixtures shared by the benchmarks.

use chrono::NaiveDate;
use hodl_core::{BasketPanel, CounterRng, RiskFreeCurve, StreamKey};
use nalgebra::DMatrix;

pub fn normal(r: &mut CounterRng) -> f64 {
    let u1 = 1.0 - r.next_f64();
    let u2 = r.next_f64();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random-walk basket where every coin is valid on every day.
pub fn panel(coins: usize, days: usize, seed: u64) -> (BasketPanel, RiskFreeCurve) {
    let start = NaiveDate::from_ymd_opt(2019, 1, 7).unwrap();
    let mut r = StreamKey::new(seed).rng();
    let mut high = Vec::new();
    let mut low = Vec::new();
    for _ in 0..coins {
        let mut level = 50.0;
        let (mut h, mut l) = (Vec::with_capacity(days), Vec::with_capacity(days));
        for _ in 0..days {
            level *= (0.03 * normal(&mut r)).exp();
            let lo = level * (1.0 - 0.03 * r.next_f64());
            l.push(lo);
            h.push(lo * (1.0 + 0.06 * r.next_f64()));
        }
        high.push(h);
        low.push(l);
    }
    let symbols = (0..coins).map(|i| format!("C{i}")).collect();
    let basket = BasketPanel::from_columns("BENCH", start, symbols, high, low).unwrap();
    let curve = RiskFreeCurve::from_daily_rates(start, &vec![0.04 / 365.0; days]);
    (basket, curve)
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = StreamKey::new(seed).rng();
    DMatrix::from_fn(rows, cols, |_, _| normal(&mut r))
}

/// `Y = X B + noise` with the first `active` rows of `B` nonzero.
pub fn regression(t: usize, p: usize, m: usize, active: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let x = gaussian(t, p, seed);
    let b = DMatrix::from_fn(p, m, |i, k| if i < active { 1.0 - 0.3 * k as f64 } else { 0.0 });
    let y = &x * b + gaussian(t, m, seed + 1);
    (x, y)
}

use criterion::{criterion_group, criterion_main, Criterion};
use hodl_bench::{gaussian, regression};
use hodl_core::features::{frac_diff, HORIZONS};
use hodl_core::lp::{lp_surface, rw1_smooth, spacings, LpDesign};
use hodl_core::selection::{fit_multitask_enet, EnetProblem};
use hodl_core::{LpConfig, StreamKey};
use std::hint::black_box;

fn bench_enet(c: &mut Criterion) {
    let (x, y) = regression(300, 40, 4, 5, 11);
    let alpha = 0.1 * EnetProblem::new(&x, &y).unwrap().alpha_max();
    c.bench_function("enet_300x40x4", |b| b.iter(|| fit_multitask_enet(black_box(&x), &y, alpha).unwrap()));
}

fn bench_rw1(c: &mut Criterion) {
    let delta = spacings(&HORIZONS);
    let beta = [0.1, 0.3, -0.2, 0.05, 0.4, 0.0];
    let se = [0.1, 0.2, 0.15, 0.3, 0.25, 0.5];
    c.bench_function("rw1_smooth_h6", |b| b.iter(|| rw1_smooth(black_box(&beta), &se, &delta, 1.0)));
}

fn bench_frac_diff(c: &mut Criterion) {
    let x: Vec<f64> = gaussian(1, 500, 5).iter().copied().collect();
    c.bench_function("frac_diff_500", |b| b.iter(|| frac_diff(black_box(&x), 0.5, 200)));
}

fn bench_surface(c: &mut Criterion) {
    let horizons = HORIZONS.to_vec();
    let (t, p, m) = (200, 8, 4);
    let design = LpDesign {
        basket: "BENCH".into(),
        horizons: horizons.clone(),
        predictors: (0..p).map(|i| format!("p{i}")).collect(),
        targets: (0..m).map(|k| format!("t{k}")).collect(),
        z: (0..horizons.len()).map(|i| gaussian(t, p, 100 + i as u64)).collect(),
        y: (0..horizons.len()).map(|i| gaussian(t, m, 200 + i as u64)).collect(),
        scales: vec![vec![1.0; m]; horizons.len()],
    };
    let cfg = LpConfig {
        replicates: 99,
        ..LpConfig::default()
    };
    let mut g = c.benchmark_group("lp_surface");
    g.sample_size(10);
    g.bench_function("t200_p8_m4_b99", |b| b.iter(|| lp_surface(black_box(&design), &cfg, StreamKey::new(9)).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_enet, bench_rw1, bench_frac_diff, bench_surface);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use hodl_bench::{normal, panel};
use hodl_core::metrics::{compute_metrics, Flavor};
use hodl_core::sim::simulate_batch;
use hodl_core::{HorizonInterval, SimConfig, StreamKey};
use std::hint::black_box;

fn bench_simulate(c: &mut Criterion) {
    let (basket, curve) = panel(3, 2000, 1);
    let mut g = c.benchmark_group("simulate_batch");
    for n in [10_000usize, 100_000] {
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            let cfg = SimConfig::new("BENCH", HorizonInterval::new(181, 365).unwrap(), n, 42);
            b.iter(|| simulate_batch(black_box(&cfg), &basket, &curve).unwrap())
        });
    }
    g.finish();
}

fn bench_metrics(c: &mut Criterion) {
    let mut r = StreamKey::new(3).rng();
    let xs: Vec<f64> = (0..1_000_000).map(|_| 0.2 * normal(&mut r)).collect();
    let mut g = c.benchmark_group("compute_metrics");
    g.throughput(Throughput::Elements(xs.len() as u64));
    g.bench_function("overall_1e6", |b| b.iter(|| compute_metrics(black_box(&xs), 0.01, Flavor::Overall).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_simulate, bench_metrics);
criterion_main!(benches);

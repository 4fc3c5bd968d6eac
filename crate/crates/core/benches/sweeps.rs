use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pgas_core::models::{degenerate_collapse, random_stable_system, Lgss};
use pgas_core::par::{par_map, seq_map};
use pgas_core::rng::{seeded, stream};
use pgas_core::{initial_trajectory, pgas_sweep, KernelConfig, Model, TruncationPolicy};

// A per-item workload roughly the size of one ancestor weight on a long horizon.
fn busy(i: usize, work: usize) -> f64 {
    let mut acc = i as f64;
    for k in 0..work {
        acc = (acc * 0.999 + k as f64).sin();
    }
    acc
}

fn map_backends(c: &mut Criterion) {
    let mut group = c.benchmark_group("map");
    for &work in &[16usize, 256, 4096] {
        group.bench_with_input(BenchmarkId::new("seq", work), &work, |b, &w| {
            b.iter(|| seq_map(512, |i| busy(i, black_box(w))))
        });
        group.bench_with_input(BenchmarkId::new("par", work), &work, |b, &w| {
            b.iter(|| par_map(512, |i| busy(i, black_box(w))))
        });
    }
    group.finish();
}

fn lgss_sweep(c: &mut Criterion) {
    let mut rng = seeded(7);
    let (_, y) = pgas_core::models::LgssParams::new(0.9, 0.1, 0.5).unwrap().simulate(500, &mut rng);
    let model = Lgss::new(0.9, 0.1, 0.5, y).unwrap();
    let mut group = c.benchmark_group("lgss_pgas_sweep");
    group.sample_size(20);
    for &n in &[100usize, 1000] {
        let reference = initial_trajectory(&model, n, &mut rng).unwrap();
        let cfg = KernelConfig::pgas(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut r = stream(11, n as u64);
            b.iter(|| pgas_sweep(&model, &reference, &cfg, &mut r).unwrap())
        });
    }
    group.finish();
}

// Non-Markovian ancestor weights dominate here, which is where the parallel path pays off.
fn degenerate_sweep(c: &mut Criterion) {
    let mut rng = seeded(3);
    let sys = random_stable_system(5, 2, &mut rng).unwrap();
    let (_, _, y) = sys.simulate(200, &mut rng);
    let model = degenerate_collapse(&sys, y).unwrap();
    let n = 50;
    let reference = initial_trajectory(&model, n, &mut rng).unwrap();
    let mut group = c.benchmark_group("degenerate_pgas_sweep");
    group.sample_size(10);
    let policies = [
        ("full", TruncationPolicy::Full),
        ("fixed10", TruncationPolicy::Fixed(10)),
    ];
    for (name, policy) in policies {
        let cfg = KernelConfig::pgas(n).with_truncation(policy);
        group.bench_function(name, |b| {
            let mut r = stream(5, model.horizon() as u64);
            b.iter(|| pgas_sweep(&model, &reference, &cfg, &mut r).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, map_backends, lgss_sweep, degenerate_sweep);
criterion_main!(benches);

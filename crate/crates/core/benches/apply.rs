//! Hψ on synthetic subspaces: the sequential kernel, the rayon kernel (the
//! same as sequential in a `--no-default-features` build) and the
//! rank-decomposed engine at 4 ranks.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sqd_core::engine::{distributed_apply, plan_partition, synthetic_problem, EngineOptions};
use sqd_core::sci::LinearOperator;

fn apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply");
    group.sample_size(20);
    for dim in [2_500usize, 10_000, 40_000] {
        let (ham, psi) = synthetic_problem(dim, 7).expect("synthetic problem");
        let mut y = vec![0.0; psi.len()];
        group.bench_with_input(BenchmarkId::new("sequential", dim), &dim, |b, _| {
            b.iter(|| ham.apply_sequential(black_box(&psi), &mut y).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("rayon", dim), &dim, |b, _| {
            b.iter(|| ham.apply(black_box(&psi), &mut y).unwrap())
        });
        let (da, db) = (ham.basis().dim_alpha(), ham.basis().dim_beta());
        let plan = plan_partition(da, db, 2, 2, 1, 1).expect("2x2 plan");
        let opts = EngineOptions::default();
        group.bench_with_input(BenchmarkId::new("distributed_2x2", dim), &dim, |b, _| {
            b.iter(|| distributed_apply(&ham, black_box(&psi), &plan, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, apply);
criterion_main!(benches);

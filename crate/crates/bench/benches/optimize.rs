use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fbshare::{
    actual_cost, monte_carlo_cost, optimize_g_continuous, optimize_g_discrete, partition_grouped,
    plan_grouping, sweep, CostMode,
};
use fbshare_bench::fixture;

fn optimize(c: &mut Criterion) {
    c.bench_function("discrete_K8_M120", |b| {
        b.iter(|| optimize_g_discrete(black_box(8), black_box(120), CostMode::Mac, 1.0).unwrap())
    });
    c.bench_function("continuous_K8_M120", |b| {
        b.iter(|| optimize_g_continuous(black_box(8), black_box(120), CostMode::Mac, 1.0).unwrap())
    });
    c.bench_function("sweep_K8", |b| {
        b.iter(|| sweep(8, black_box(&[64, 128, 256, 512]), CostMode::Mac, 1.0).unwrap())
    });

    let (bank, _) = fixture(8, 120, 1, 50);
    let plan = plan_grouping(8, 2).unwrap();
    c.bench_function("partition_cost_K8_M120_G2", |b| {
        b.iter(|| {
            let parts = partition_grouped(black_box(&bank), &plan).unwrap();
            actual_cost(&parts, &plan, CostMode::Pyramid).unwrap()
        })
    });

    let mut group = c.benchmark_group("montecarlo");
    group.sample_size(10);
    group.bench_function("K4_M32_G1_2000", |b| {
        b.iter(|| monte_carlo_cost(4, 32, 1, CostMode::Pyramid, black_box(2000), 50).unwrap())
    });
    group.finish();
}

criterion_group!(benches, optimize);
criterion_main!(benches);

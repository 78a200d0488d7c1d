use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use multisplit::{
    build_block_splitting, make_grid_lcp, solve_async_sim, solve_sub_lcp, solve_sync,
    AsyncSchedule, GridLcpSpec, InnerSchedule, MStructure, Partition, SolverConfig,
    SplittingVariant, UpdatePolicy,
};
use std::hint::black_box;

fn spmv(c: &mut Criterion) {
    let mut group = c.benchmark_group("spmv");
    for p in [32, 128] {
        let prob = make_grid_lcp(GridLcpSpec::new(p)).unwrap();
        let x: Vec<f64> = (0..prob.n()).map(|i| (i as f64).sin()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(p), &x, |b, x| {
            b.iter(|| prob.a().spmv(black_box(x)).unwrap())
        });
    }
    group.finish();
}

fn sub_lcp(c: &mut Criterion) {
    let prob = make_grid_lcp(GridLcpSpec::new(32)).unwrap();
    let lower = prob.a().filter(|r, c, _| c <= r);
    let mut group = c.benchmark_group("sub_lcp");
    group.bench_function("lower_triangular", |b| {
        b.iter(|| {
            solve_sub_lcp(
                &lower,
                MStructure::LowerTriangular,
                black_box(prob.f()),
                1e-12,
                10,
            )
            .unwrap()
        })
    });
    group.bench_function("general", |b| {
        b.iter(|| {
            solve_sub_lcp(
                prob.a(),
                MStructure::General,
                black_box(prob.f()),
                1e-10,
                100_000,
            )
            .unwrap()
        })
    });
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let prob = make_grid_lcp(GridLcpSpec::new(16)).unwrap();
    let partition = Partition::contiguous(prob.n(), 4).unwrap();
    let ms = build_block_splitting(prob.a(), &partition, SplittingVariant::BlockLowerTriangular)
        .unwrap();
    let mut group = c.benchmark_group("grid16_m4");
    group.sample_size(10);
    for q in [1, 4] {
        let cfg = SolverConfig {
            schedule: InnerSchedule::fixed(q),
            record_history: false,
            ..SolverConfig::default()
        };
        group.bench_with_input(BenchmarkId::new("sync", q), &cfg, |b, cfg| {
            b.iter(|| solve_sync(&prob, &ms, cfg).unwrap())
        });
        let sched = AsyncSchedule::new(2, UpdatePolicy::RoundRobin { period: 2 });
        group.bench_with_input(BenchmarkId::new("async_sim_d2", q), &cfg, |b, cfg| {
            b.iter(|| solve_async_sim(&prob, &ms, cfg, &sched).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, spmv, sub_lcp, solvers);
criterion_main!(benches);

//! Parallel-vs-sequential comparison of the data-parallel hot paths:
//! the parameter-region sweep and the per-ray stream reconstruction.
//!
//! Build with the default `parallel` feature; the `*_seq` reference paths are
//! compiled unconditionally, so one run measures both.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ringwave::benchmarks::{ex1, EX1_ALPHA_C};
use ringwave::fields::make_grid;
use ringwave::linops::trivial_field;
use ringwave::reconstruct::{reconstruct, reconstruct_seq};
use ringwave::sweep::{sweep_region, sweep_region_seq};

fn bench_region_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("region_sweep");
    for n in [51usize, 101] {
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| sweep_region((0.05, 0.95), (0.5, 2.5), n, n, 1e-9).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| sweep_region_seq((0.05, 0.95), (0.5, 2.5), n, n, 1e-9).unwrap())
        });
    }
    group.finish();
}

fn bench_reconstruction(c: &mut Criterion) {
    let params = ex1();
    let grid = make_grid(64, 32).unwrap();
    let h = trivial_field(&params, grid);
    let mut group = c.benchmark_group("stream_reconstruction");
    group.sample_size(20);
    group.bench_function("parallel", |b| {
        b.iter(|| reconstruct(&h, 65, &params, EX1_ALPHA_C, None).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| reconstruct_seq(&h, 65, &params, EX1_ALPHA_C, None).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_region_sweep, bench_reconstruction);
criterion_main!(benches);

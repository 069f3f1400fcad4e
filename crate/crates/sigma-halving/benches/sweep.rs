//! Compares the sequential fallback against the rayon path for the three
//! data-parallel workloads: range sweeps, abundancy scans and batch
//! convergence checks. Build with `--no-default-features` to time the
//! fully sequential crate.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sigma_halving::harness::{sweep, SweepConfig};
use sigma_halving::perfection::{abundancy_index, search_abundancy, ExactRatio};
use sigma_halving::trajectory::{reaches_one, Budget, Convergence};
use sigma_halving::Natural;

fn available_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn bench_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep_1_to_200k");
    group.sample_size(10);
    for workers in [1, available_workers()] {
        group.bench_with_input(
            BenchmarkId::new("workers", workers),
            &workers,
            |b, &workers| {
                b.iter(|| {
                    let mut config = SweepConfig::new(1, 200_000);
                    config.workers = workers;
                    config.chunk_size = 8192;
                    sweep(&config).unwrap()
                })
            },
        );
    }
    group.finish();
}

fn bench_abundancy_search(c: &mut Criterion) {
    // parallelism is internal to search_abundancy; with the `parallel`
    // feature disabled this measures the sequential fallback
    let mut group = c.benchmark_group("abundancy_search_2M");
    group.sample_size(10);
    let target: ExactRatio = ExactRatio::from_integer(Natural::from(2u32));
    group.bench_function("perfect_numbers", |b| {
        b.iter(|| search_abundancy(&target, 2_000_000))
    });
    group.finish();
}

fn bench_trajectory_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("trajectory_batch_odd_50k");
    group.sample_size(10);
    let budget = Budget::default();
    let run_one = |n: u64| {
        matches!(
            reaches_one(&Natural::from(n), &budget),
            Convergence::Converged { .. }
        )
    };
    group.bench_function("sequential", |b| {
        b.iter(|| (1..50_000u64).step_by(2).filter(|&n| run_one(n)).count())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("rayon", |b| {
        use rayon::prelude::*;
        b.iter(|| {
            (1..50_000u64)
                .into_par_iter()
                .filter(|n| n % 2 == 1 && run_one(*n))
                .count()
        })
    });
    group.finish();
}

fn bench_abundancy_index(c: &mut Criterion) {
    let n = Natural::from(963_761_198_400u64); // highly composite
    c.bench_function("abundancy_index_12digit", |b| {
        b.iter(|| abundancy_index(&n).unwrap())
    });
}

criterion_group!(
    benches,
    bench_sweep,
    bench_abundancy_search,
    bench_trajectory_batch,
    bench_abundancy_index
);
criterion_main!(benches);

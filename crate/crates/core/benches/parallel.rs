//! Data-parallel core against a one-thread pool.
//!
//! With the `parallel` feature every kernel runs twice: on the global rayon
//! pool and inside a single-thread pool, which exercises the same code path
//! without concurrency. Built with `--no-default-features` only the
//! sequential fallback is measured.

use std::hint::black_box;
use std::sync::Arc;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hypvar::hypgeom::montecarlo_integral_dmu;
use hypvar::radial::{assemble_operators, RadialGrid};
use hypvar::threshold::{estimate_sobolev_constant, SobolevOptions};

type Kernel = Box<dyn Fn() + Sync + Send>;

fn kernels() -> Vec<(&'static str, Kernel)> {
    let grid = Arc::new(RadialGrid::uniform(4, 4096, 10.0, 6).unwrap());
    let small = Arc::new(RadialGrid::uniform(4, 256, 10.0, 6).unwrap());
    let g = grid.clone();
    vec![
        (
            "montecarlo_200k",
            Box::new(|| {
                let est =
                    montecarlo_integral_dmu(|p| (1.0 - p.norm_sq()).powi(4) / 16.0, 4, 200_000, 0.999, 1).unwrap();
                black_box(est);
            }),
        ),
        (
            "sobolev_10_starts",
            Box::new(move || {
                let opts = SobolevOptions { max_iters: 200, ..SobolevOptions::default() };
                black_box(estimate_sobolev_constant(&small, 3.0, &opts).unwrap().value);
            }),
        ),
        (
            "assembly_4096",
            Box::new(move || {
                let w = |s: f64| (-s).exp();
                black_box(assemble_operators(&g, Some(&w)).unwrap());
            }),
        ),
    ]
}

fn bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("core");
    group.sample_size(10);
    group.warm_up_time(Duration::from_millis(500));
    group.measurement_time(Duration::from_secs(3));
    #[cfg(feature = "parallel")]
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    for (name, f) in kernels() {
        #[cfg(feature = "parallel")]
        {
            let threads = rayon::current_num_threads();
            group.bench_function(BenchmarkId::new(format!("rayon_{threads}"), name), |b| b.iter(&f));
            group.bench_function(BenchmarkId::new("single_thread", name), |b| b.iter(|| one.install(&f)));
        }
        #[cfg(not(feature = "parallel"))]
        group.bench_function(BenchmarkId::new("sequential", name), |b| b.iter(&f));
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);

//! Compares the rayon-backed indexed map against the sequential fallback on
//! the crate's two data-parallel workloads: bootstrap replicate evaluation
//! and panel simulation. `map_indexed_serial` is exactly the code path the
//! build uses when the `parallel` feature is disabled.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bunchkit::boundary::kink_estimates_scaled;
use bunchkit::data::PaycheckTable;
use bunchkit::par;
use bunchkit::simulate::{simulate_isoelastic, SimConfig};

fn mid_size_table() -> PaycheckTable {
    let mut cfg = SimConfig::baseline(7);
    cfg.n_workers = 2_000;
    cfg.n_weeks = 10;
    cfg.n_firms = 100;
    cfg.p_mass = 0.05;
    simulate_isoelastic(&cfg).expect("simulate").table
}

fn replicate_bounds(table: &PaycheckTable, bandwidth: f64, rep: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep as u64);
    let n_firms = table.n_firms();
    let draws: Vec<usize> = (0..n_firms)
        .map(|_| (rng.next_u64() % n_firms as u64) as usize)
        .collect();
    let resampled = table.resample_firms(&draws);
    let hours = resampled.hours_vec();
    kink_estimates_scaled(&hours, 40.0, 0.0, Some(bandwidth), 1, 1e-9)
        .map(|e| e.dens_minus)
        .unwrap_or(f64::NAN)
}

fn bench_bootstrap_replicates(c: &mut Criterion) {
    let table = mid_size_table();
    let hours = table.hours_vec();
    let bandwidth = bunchkit::boundary::select_bandwidth(&hours, 40.0).expect("bandwidth");

    let mut group = c.benchmark_group("bootstrap_replicates_x64");
    group.sample_size(10);
    group.bench_function("parallel_facade", |b| {
        b.iter(|| {
            black_box(par::map_indexed(64, |r| {
                replicate_bounds(&table, bandwidth, r)
            }))
        })
    });
    group.bench_function("serial_fallback", |b| {
        b.iter(|| {
            black_box(par::map_indexed_serial(64, |r| {
                replicate_bounds(&table, bandwidth, r)
            }))
        })
    });
    group.finish();
}

fn bench_simulation(c: &mut Criterion) {
    let mut cfg = SimConfig::baseline(13);
    cfg.n_workers = 5_000;
    cfg.n_weeks = 10;
    cfg.n_firms = 200;

    let mut group = c.benchmark_group("simulate_50k_rows");
    group.sample_size(10);
    group.bench_function("default_pool", |b| {
        b.iter(|| black_box(simulate_isoelastic(&cfg).unwrap().table.len()))
    });
    #[cfg(feature = "parallel")]
    group.bench_function("single_thread_pool", |b| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        b.iter(|| pool.install(|| black_box(simulate_isoelastic(&cfg).unwrap().table.len())))
    });
    group.finish();
}

criterion_group!(benches, bench_bootstrap_replicates, bench_simulation);
criterion_main!(benches);

//! Grid-sweep throughput with the parallel map against a plain sequential
//! loop over the same work.
//!
//! The crate's data parallelism lives in `parallel::map_slice`, which routes
//! through rayon under the default `parallel` feature and degrades to a
//! plain iterator without it. Benchmarking the sweep through both paths in
//! one binary shows the speedup (or, on a single-core host, the parity).

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use becmod::modes::{solve_mode, ModeIndex, SolveOptions};
use becmod::order_parameter::{eta_from_trajectory, ratio_grid, sweep_ratios};
use becmod::overlaps::{build_table, OverlapTable};
use becmod::twomode::{integrate, DriveParams, IntegrationParams, TwoModeState};

fn reference_table() -> OverlapTable {
    let ground = solve_mode(70.0, 0.2, ModeIndex::GROUND, SolveOptions::default()).unwrap();
    let excited =
        solve_mode(70.0, 0.2, ModeIndex::RADIAL_DIPOLE, SolveOptions::default()).unwrap();
    build_table(&ground, &excited).unwrap()
}

fn short_window() -> IntegrationParams {
    IntegrationParams {
        dtau: 1e-3,
        tau_max: 20.0,
        stride: 100,
    }
}

fn bench_sweep(c: &mut Criterion) {
    let table = reference_table();
    let ratios = ratio_grid(0.5, 1.2, 0.025).unwrap();
    let params = short_window();

    let mut group = c.benchmark_group("ratio_sweep");
    group.sample_size(10);

    group.bench_function("map_slice", |b| {
        b.iter_batched(
            || ratios.clone(),
            |grid| sweep_ratios(&table, 0.02, &grid, &params),
            BatchSize::SmallInput,
        )
    });

    group.bench_function("sequential_reference", |b| {
        b.iter_batched(
            || ratios.clone(),
            |grid| {
                grid.iter()
                    .map(|&ratio| {
                        let traj = integrate(
                            &table,
                            &DriveParams { ratio, delta: 0.02 },
                            &TwoModeState::ground_only(),
                            &params,
                        )
                        .unwrap();
                        eta_from_trajectory(&traj).unwrap().eta
                    })
                    .collect::<Vec<f64>>()
            },
            BatchSize::SmallInput,
        )
    });

    group.finish();
}

fn bench_single_trajectory(c: &mut Criterion) {
    let table = reference_table();
    let params = short_window();
    c.bench_function("single_trajectory_tau20", |b| {
        b.iter(|| {
            integrate(
                &table,
                &DriveParams {
                    ratio: 0.7,
                    delta: 0.0,
                },
                &TwoModeState::ground_only(),
                &params,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, bench_sweep, bench_single_trajectory);
criterion_main!(benches);

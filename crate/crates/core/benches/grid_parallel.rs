//! Compares parallel and sequential execution of independent grid cells.
//!
//! Each cell runs `unixgrad` on its own sub-seeded oracle, which is the
//! workload shape of every orchestrator stage. The sequential path is the
//! exact code the crate compiles to without the `parallel` feature.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use grasp_core::base::run_unixgrad;
use grasp_core::exec;
use grasp_core::grasp::{grasp_nc, UserInputs};
use grasp_core::problems::{NoiseModel, Problem, StochasticOracle};

fn cell_jobs(n: usize, pairs: u64) -> Vec<(f64, StochasticOracle)> {
    let p = Arc::new(Problem::quadratic(vec![0.0; 8], vec![1.0; 8]).unwrap());
    let mut parent = StochasticOracle::new(p, NoiseModel::constant(0.1, 0.1), 7, None);
    (1..=n)
        .map(|i| {
            (
                0.01 * (1 << i.min(20)) as f64,
                parent.derive(Some(2 * pairs)),
            )
        })
        .collect()
}

fn bench_grid_cells(c: &mut Criterion) {
    let x0 = vec![4.0; 8];
    let mut group = c.benchmark_group("grid_cells");
    for &(cells, pairs) in &[(16usize, 400u64), (32, 800)] {
        group.bench_with_input(
            BenchmarkId::new("parallel", format!("{cells}x{pairs}")),
            &(cells, pairs),
            |b, &(cells, pairs)| {
                b.iter_batched(
                    || cell_jobs(cells, pairs),
                    |jobs| {
                        black_box(exec::map_items(jobs, |(d, mut o)| {
                            run_unixgrad(&mut o, &x0, d, pairs).unwrap().output
                        }))
                    },
                    criterion::BatchSize::SmallInput,
                )
            },
        );
        group.bench_with_input(
            BenchmarkId::new("sequential", format!("{cells}x{pairs}")),
            &(cells, pairs),
            |b, &(cells, pairs)| {
                b.iter_batched(
                    || cell_jobs(cells, pairs),
                    |mut jobs| {
                        black_box(exec::map_indexed_seq(jobs.len(), |i| {
                            let (d, o) = &mut jobs[i];
                            run_unixgrad(o, &x0, *d, pairs).unwrap().output
                        }))
                    },
                    criterion::BatchSize::SmallInput,
                )
            },
        );
    }
    group.finish();
}

fn bench_full_orchestrator(c: &mut Criterion) {
    let p = Arc::new(Problem::smooth_nonconvex(vec![2.0; 4], 0.1, 5.0).unwrap());
    let x0 = vec![0.0; 4];
    let inputs = UserInputs {
        budget: 20_000,
        confidence: 0.05,
        smoothness_floor: 0.01,
        gap_floor: 0.01,
        ..UserInputs::new(20_000, 0.05)
    };
    c.bench_function("grasp_nc_t20000", |b| {
        b.iter(|| {
            let mut o = StochasticOracle::new(
                Arc::clone(&p),
                NoiseModel::constant(0.1, 0.0),
                11,
                Some(20_000),
            );
            black_box(grasp_nc(&mut o, &x0, &inputs).unwrap().output)
        })
    });
}

criterion_group!(benches, bench_grid_cells, bench_full_orchestrator);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hitwalk::hitting::mht_grid;
use hitwalk::optimizer::minimize_mht;
use hitwalk::trajectories::{run_trajectories, TrajectoryConfig};
use hitwalk::{ChainGeometry, CoinSpec, Execution};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn trajectories(c: &mut Criterion) {
    let g = ChainGeometry::symmetric(5).unwrap();
    let mut group = c.benchmark_group("trajectories_10k");
    for mode in MODES {
        let cfg = TrajectoryConfig::new(10_000, 7, 100_000, 0.05, 0.1)
            .unwrap()
            .with_execution(mode);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &cfg, |b, cfg| {
            b.iter(|| run_trajectories(cfg, &g, &CoinSpec::Plus).unwrap())
        });
    }
    group.finish();
}

fn resolvent_grid(c: &mut Criterion) {
    let g = ChainGeometry::symmetric(5).unwrap();
    let points: Vec<(f64, f64)> = (0..32).map(|k| (0.03 * k as f64, 0.0)).collect();
    let mut group = c.benchmark_group("resolvent_grid_32");
    group.sample_size(10);
    for mode in MODES {
        group.bench_function(format!("{mode:?}"), |b| {
            b.iter(|| mht_grid(&g, &CoinSpec::Plus, &points, mode))
        });
    }
    group.finish();
}

fn optimizer_scan(c: &mut Criterion) {
    let g = ChainGeometry::symmetric(4).unwrap();
    let mut group = c.benchmark_group("optimizer_scan");
    group.sample_size(10);
    for mode in MODES {
        group.bench_function(format!("{mode:?}"), |b| {
            b.iter(|| minimize_mht(&g, &CoinSpec::Plus, 0.1, 49, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, trajectories, resolvent_grid, optimizer_scan);
criterion_main!(benches);

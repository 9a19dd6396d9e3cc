//! Parallel vs sequential fan-out on the two hot loops: Rademacher draws and
//! certification replications. Both modes produce identical numbers, so only
//! the wall clock differs.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use wdro::calibration::{rademacher_mc, QuadraticBallClass};
use wdro::certify::{run_coverage, ExperimentConfig};
use wdro::seed::rng_for;
use wdro::Execution;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn bench_rademacher(c: &mut Criterion) {
    let mut rng = rng_for(1, 0);
    let z: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let class = QuadraticBallClass { z, radius: 1.0 };
    let mut group = c.benchmark_group("rademacher_mc");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, 2000), &exec, |b, &exec| {
            b.iter(|| rademacher_mc(black_box(&class), 2000, 7, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_coverage(c: &mut Criterion) {
    let config: ExperimentConfig = serde_json::from_str(
        r#"{
            "generator": { "kind": "bounded_uniform_box", "lo": [0.0, 0.0], "hi": [1.0, 2.0] },
            "problem": { "kind": "newsvendor", "h": 1.0, "b": 2.0, "radius": 5.0 },
            "rule": "newsvendor",
            "n": 50,
            "replications": 64,
            "t": 2.0,
            "seed": 3
        }"#,
    )
    .unwrap();
    let mut group = c.benchmark_group("run_coverage");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, config.replications), &exec, |b, &exec| {
            b.iter(|| run_coverage(black_box(&config), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_rademacher, bench_coverage);
criterion_main!(benches);

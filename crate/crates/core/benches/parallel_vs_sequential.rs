use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use haarsel::design::{build_design, covariates_at_nodes};
use haarsel::par::Execution;
use haarsel::quadrature::build_quadrature;
use haarsel::scenario::{run_scenario, simulate_replicate, ScenarioConfig};
use haarsel::select::Method;
use haarsel::wavelet::HaarBasis;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn design(c: &mut Criterion) {
    let cfg = ScenarioConfig::default();
    let rep = simulate_replicate(&cfg, 500.0, 11).unwrap();
    let scheme = build_quadrature(&rep.pattern, &rep.pattern.window, (16, 16)).unwrap();
    let table = covariates_at_nodes(&rep.covariates, &rep.names, &scheme).unwrap();
    let mut group = c.benchmark_group("design_build");
    for j in [2u32, 3] {
        let basis = HaarBasis::new(0, j).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, format!("J{j}")), &exec, |b, &exec| {
                b.iter(|| black_box(build_design(&table, &basis, &scheme, exec).unwrap()))
            });
        }
    }
    group.finish();
}

fn replicates(c: &mut Criterion) {
    let cfg = ScenarioConfig {
        mu_targets: vec![100.0],
        replicates: 4,
        methods: vec![Method::Lasso, Method::Scad, Method::Al],
        ..ScenarioConfig::default()
    };
    let mut group = c.benchmark_group("scenario_replicates");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| black_box(run_scenario(&cfg, exec, 0))));
    }
    group.finish();
}

criterion_group!(benches, design, replicates);
criterion_main!(benches);

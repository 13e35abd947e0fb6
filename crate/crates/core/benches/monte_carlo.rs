use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cdeob::exec::Execution;
use cdeob::harness::{run_simulation, SimConfig};
use cdeob::ignorability::check_corpus;
use cdeob::scm::{sample_population_with, ScmParams};

fn modes() -> [(&'static str, Execution, usize); 2] {
    [("sequential", Execution::Sequential, 1), ("parallel", Execution::Parallel, 0)]
}

fn sampling(c: &mut Criterion) {
    let params = ScmParams::paper(0.3, 0.3);
    let mut g = c.benchmark_group("sample_population");
    for n in [20_000usize, 100_000] {
        for (name, exec, _) in modes() {
            g.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| {
                b.iter(|| sample_population_with(&params, n, 7, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn simulation_cell(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulation_cell");
    g.sample_size(10);
    for (name, _, workers) in modes() {
        let cfg = SimConfig {
            alpha_black_grid: vec![0.3],
            beta_black_grid: vec![0.3],
            n_per_dataset: 20_000,
            replications: 20,
            parallelism: workers,
            ..SimConfig::desk(1)
        };
        g.bench_function(name, |b| b.iter(|| run_simulation(&cfg).unwrap()));
    }
    g.finish();
}

fn corpus(c: &mut Criterion) {
    let mut g = c.benchmark_group("implication_corpus");
    g.sample_size(10);
    for (name, exec, _) in modes() {
        g.bench_function(name, |b| b.iter(|| check_corpus(0..500, exec)));
    }
    g.finish();
}

criterion_group!(benches, sampling, simulation_cell, corpus);
criterion_main!(benches);

//! Parallel vs sequential evaluation of spectrum grids, the estimator and an
//! SME ensemble.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use polyspec::estimator::{estimate_s3, EstimatorConfig};
use polyspec::model::presets;
use polyspec::polyspectra::{linspace, symmetric_grid, SpectralEngine};
use polyspec::sme::{spawn_ensemble, Scheme, SimConfig};
use polyspec::Execution;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn spectra(c: &mut Criterion) {
    let model = presets::single_spin_random_time(5.0).build().unwrap();
    let line = linspace(0.0, 60.0, 2001);
    let plane = symmetric_grid(0.5, 20);
    let mut g = c.benchmark_group("spectra");
    g.sample_size(10);
    for (name, exec) in MODES {
        let e = SpectralEngine::new(&model).unwrap().with_execution(exec);
        g.bench_with_input(BenchmarkId::new("s2", name), &e, |b, e| b.iter(|| e.s2(black_box(&line))));
        g.bench_with_input(BenchmarkId::new("s3", name), &e, |b, e| b.iter(|| e.s3(black_box(&plane), &plane)));
        g.bench_with_input(BenchmarkId::new("s4", name), &e, |b, e| b.iter(|| e.s4(black_box(&plane), &plane)));
    }
    g.finish();
}

fn estimation(c: &mut Criterion) {
    let model = presets::two_level_continuous().build().unwrap();
    let mut g = c.benchmark_group("estimation");
    g.sample_size(10);
    let sim = SimConfig::new(2e-3, 200.0, 3).with_scheme(Scheme::Kraus);
    let traces = spawn_ensemble(&model, &sim, 2).unwrap();
    let records: Vec<&[f64]> = traces.iter().map(|t| t.samples.as_slice()).collect();
    for (name, exec) in MODES {
        let mut cfg = EstimatorConfig::new(1024).with_decimation(16);
        cfg.execution = exec;
        g.bench_with_input(BenchmarkId::new("s3", name), &cfg, |b, cfg| {
            b.iter(|| estimate_s3(black_box(&records), sim.dt, cfg).unwrap())
        });
        let mut ens = SimConfig::new(2e-3, 20.0, 5).with_scheme(Scheme::Kraus);
        ens.execution = exec;
        g.bench_with_input(BenchmarkId::new("ensemble", name), &ens, |b, ens| {
            b.iter(|| spawn_ensemble(&model, black_box(ens), 4).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, spectra, estimation);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use pmlp::bench::{run_campaign, ExperimentConfig, SeriesSource};
use pmlp::optim::LmConfig;
use pmlp::par::Exec;
use pmlp::prune::{build_mask, stage1_ensemble, BootstrapConfig, Stage1Config};
use pmlp::series::{embed_lags, split, synth_series, Scaler, Scaling, SeriesKind, SplitSpec};
use pmlp::{Dataset, Topology};

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn training_set() -> Dataset {
    let series = synth_series(SeriesKind::Temperature, 3607, 0.8, 1);
    let (train, _) = split(&embed_lags(&series, 7).unwrap(), SplitSpec::default()).unwrap();
    Scaler::fit(Scaling::MinMax, &train).unwrap().apply(&train)
}

fn stage1(c: &mut Criterion) {
    let topo = Topology::new(7, 2).unwrap();
    let ds = training_set();
    let mut group = c.benchmark_group("stage1_ensemble");
    group.sample_size(20);
    for (name, exec) in MODES {
        let cfg = Stage1Config {
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| stage1_ensemble(&topo, black_box(&ds), &cfg, 7).unwrap())
        });
    }
    group.finish();
}

fn bootstrap(c: &mut Criterion) {
    let topo = Topology::new(7, 2).unwrap();
    let ds = training_set();
    let samples = stage1_ensemble(&topo, &ds, &Stage1Config::default(), 7).unwrap();
    let mut group = c.benchmark_group("build_mask");
    for (name, exec) in MODES {
        let cfg = BootstrapConfig {
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_mask(black_box(&samples), &cfg, 3).unwrap())
        });
    }
    group.finish();
}

fn campaign(c: &mut Criterion) {
    let mut group = c.benchmark_group("campaign");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = ExperimentConfig {
            n_runs: 2,
            split: SplitSpec {
                n_train: 800,
                n_test: 200,
            },
            lm: LmConfig {
                max_iters: 50,
                ..Default::default()
            },
            series: vec![
                SeriesSource::synthetic(SeriesKind::Humidity, 1),
                SeriesSource::synthetic(SeriesKind::WindSpeed, 1),
            ],
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_campaign(black_box(&cfg)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, stage1, bootstrap, campaign);
criterion_main!(benches);

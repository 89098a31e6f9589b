use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hystkin::{evaluate, fit_em, select_k, train_hysteresis_model, EmOptions, Exec, Preset, TrainConfig};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn dataset() -> hystkin::CycleDataset {
    Preset::PitchLike.plant(0.15, 1).generate_dataset(9, 200, 1.0, false).unwrap()
}

fn bench_fit_em(c: &mut Criterion) {
    let (train, _) = dataset().train_test_split(6).unwrap();
    let points = train.points();
    let mut group = c.benchmark_group("fit_em_k9_50iters");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let mut opts = EmOptions::new(9, 1).with_exec(exec);
        opts.max_iters = 50;
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| fit_em(black_box(&points), opts).unwrap())
        });
    }
    group.finish();
}

fn bench_select_k(c: &mut Criterion) {
    let (train, _) = dataset().train_test_split(6).unwrap();
    let points = train.points();
    let mut group = c.benchmark_group("select_k_1_to_8");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| b.iter(|| select_k(black_box(&points), 1..=8, 1, exec).unwrap()));
    }
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let (train, test) = dataset().train_test_split(6).unwrap();
    let (model, _) = train_hysteresis_model(&train, &TrainConfig::uniform(9, 1)).unwrap();
    let mut group = c.benchmark_group("evaluate_600_samples");
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| b.iter(|| evaluate(&model, black_box(&test), exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_fit_em, bench_select_k, bench_evaluate);
criterion_main!(benches);

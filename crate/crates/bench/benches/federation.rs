use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use fedplus_bench::{random_models, synthetic_tasks};
use fedplus_core::aggregate::aggregate;
use fedplus_core::local::local_solve;
use fedplus_core::rng::stream;
use fedplus_core::*;

fn aggregation(c: &mut Criterion) {
    let mut group = c.benchmark_group("aggregate");
    let models = random_models(10, 610, 1);
    let params = WeiszfeldParams::default();
    for kind in [
        Centrality::Mean,
        Centrality::GeometricMedian,
        Centrality::CoordinateMedian,
    ] {
        group.bench_with_input(
            BenchmarkId::from_parameter(kind.name()),
            &kind,
            |b, &kind| b.iter(|| aggregate(kind, &params, black_box(&models), None).unwrap()),
        );
    }
    group.finish();
}

fn local(c: &mut Criterion) {
    let tasks = synthetic_tasks(1, 0);
    let objective = tasks[0].objective();
    let spec = LocalSolveSpec {
        steps: 20,
        gamma: 0.01,
        alpha: 0.001,
        batch: BatchSize::Mini(32),
        distance: DistanceSpec::SquaredL2,
    };
    let x = ParamVector::zeros(tasks[0].dim());
    c.bench_function("local_solve/logistic-20x32", |b| {
        b.iter(|| {
            let mut rng = stream(0, &[1]);
            local_solve(&spec, objective.as_ref(), &x, &x, &mut rng).unwrap()
        })
    });
}

fn rounds(c: &mut Criterion) {
    let tasks = synthetic_tasks(30, 0);
    let settings = RunSettings {
        rounds: 1,
        participation: Participation::FixedCount { m: 10 },
        local_steps: 20,
        learning_rate: 0.01,
        batch: BatchSize::Mini(32),
        init: InitSpec::Uniform { scale: 0.05 },
        eval_every: 1,
        seed: 0,
    };
    let mut group = c.benchmark_group("round");
    for preset in [Preset::FedAvg, Preset::RfaPlus, Preset::CMedianPlus] {
        let config = preset.configure(&settings, &PresetKnobs::default());
        group.bench_function(preset.name(), |b| {
            b.iter(|| run_federation(&config, &tasks).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, aggregation, local, rounds);
criterion_main!(benches);

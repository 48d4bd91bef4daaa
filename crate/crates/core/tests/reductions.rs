//! The classical loops in `baseline` against the generic engine on logistic
//! tasks with minibatches.

use fedplus_core::baseline::{run_classical, Classical};
use fedplus_core::engine::logistic_tasks;
use fedplus_core::synth::generate;
use fedplus_core::*;

fn small_tasks(seed: u64) -> Vec<PartyTask> {
    let mut spec = SynthSpec::new(1.0, 1.0, 6, seed);
    spec.features = 8;
    spec.classes = 3;
    spec.count_law = CountLaw {
        exponent: 1.5,
        min_count: 20,
        max_count: 80,
    };
    logistic_tasks(generate(&spec).unwrap())
}

fn settings(seed: u64) -> RunSettings {
    RunSettings {
        rounds: 5,
        participation: Participation::FixedCount { m: 3 },
        local_steps: 6,
        learning_rate: 0.05,
        batch: BatchSize::Mini(8),
        init: InitSpec::Uniform { scale: 0.1 },
        eval_every: 1,
        seed,
    }
}

fn assert_same(classical: Classical, preset: Preset, knobs: &PresetKnobs) {
    let tasks = small_tasks(3);
    let s = settings(21);
    let reference = run_classical(classical, &s, &knobs.weiszfeld, &tasks).unwrap();
    let trace = run_federation(&preset.configure(&s, knobs), &tasks).unwrap();
    assert_eq!(reference.len(), trace.len());
    for (a, b) in reference.iter().zip(&trace) {
        assert_eq!(a.active, b.active, "{preset} round {}", a.round);
        let same = a
            .global
            .iter()
            .zip(b.x_hat_after.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        assert!(same, "{preset} diverged at round {}", a.round);
    }
}

#[test]
fn fedavg_matches_classical_loop() {
    assert_same(Classical::FedAvg, Preset::FedAvg, &PresetKnobs::default());
}

#[test]
fn fedprox_matches_classical_loop() {
    let knobs = PresetKnobs {
        mu: 0.3,
        ..PresetKnobs::default()
    };
    assert_same(Classical::FedProx { mu: 0.3 }, Preset::FedProx, &knobs);
}

#[test]
fn rfa_matches_classical_loop() {
    assert_same(Classical::Rfa, Preset::Rfa, &PresetKnobs::default());
}

#[test]
fn cmedian_matches_classical_loop() {
    assert_same(
        Classical::CoordinateMedian,
        Preset::CMedian,
        &PresetKnobs::default(),
    );
}

#[test]
fn fedprox_preset_equals_hand_built_generic_config() {
    let s = settings(4);
    let knobs = PresetKnobs {
        mu: 0.5,
        ..PresetKnobs::default()
    };
    let generic = FederationConfig {
        rounds: s.rounds,
        participation: s.participation,
        local_steps: s.local_steps,
        learning_rate: s.learning_rate,
        batch: s.batch,
        distance: DistanceSpec::SquaredL2,
        alpha: AlphaSchedule::constant(0.5),
        centrality: CentralitySpec::new(Centrality::Mean),
        start_mode: StartMode::Reset,
        aggregation_scope: AggregationScope::Active,
        init: s.init,
        eval_every: s.eval_every,
        seed: s.seed,
    };
    let tasks = small_tasks(5);
    let a = run_federation(&Preset::FedProx.configure(&s, &knobs), &tasks).unwrap();
    let b = run_federation(&generic, &tasks).unwrap();
    assert_eq!(a, b);
}

#[test]
fn persist_mode_moves_models_less_than_reset() {
    let tasks = small_tasks(8);
    let s = RunSettings {
        rounds: 12,
        ..settings(8)
    };
    let knobs = PresetKnobs::default();
    let plus = run_federation(&Preset::FedAvgPlus.configure(&s, &knobs), &tasks).unwrap();
    let base = run_federation(&Preset::FedAvg.configure(&s, &knobs), &tasks).unwrap();
    for (p, b) in plus.iter().zip(&base).skip(1) {
        assert!(p.change.mean < b.change.mean, "round {}", p.round);
    }
}

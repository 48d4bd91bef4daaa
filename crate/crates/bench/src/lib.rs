//! Shared fixtures for the benchmarks in `benches/`.

use fedplus_core::engine::logistic_tasks;
use fedplus_core::rng::stream;
use fedplus_core::synth::generate;
use fedplus_core::{CountLaw, ParamVector, PartyTask, SynthSpec};
use rand::Rng;

/// `n` random models of dimension `dim`.
pub fn random_models(n: usize, dim: usize, seed: u64) -> Vec<ParamVector> {
    let mut rng = stream(seed, &[7]);
    (0..n)
        .map(|_| ParamVector::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect()
}

/// The heterogeneous synthetic benchmark at a reduced sample count.
pub fn synthetic_tasks(parties: usize, seed: u64) -> Vec<PartyTask> {
    let mut spec = SynthSpec::new(1000.0, 10.0, parties, seed);
    spec.count_law = CountLaw {
        exponent: 1.5,
        min_count: 64,
        max_count: 256,
    };
    logistic_tasks(generate(&spec).expect("valid spec"))
}

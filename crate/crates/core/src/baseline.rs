//! Classical single-model algorithms written out directly: FedAvg, FedProx,
//! RFA (geometric median) and coordinate-wise median.
//!
//! These loops do not go through [`crate::engine`]; they keep one global
//! model, restart every sampled client from it and replace it with the
//! aggregate of the returned models. They share the engine's random stream
//! layout, so a correctly configured engine run reproduces them bit for bit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregate::{self, Centrality, WeiszfeldParams};
use crate::engine::{sample_parties, PartyTask};
use crate::error::{FedError, Result};
use crate::local::BatchSize;
use crate::param::ParamVector;
use crate::presets::RunSettings;
use crate::rng::{domain, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Classical {
    FedAvg,
    /// Local objective `f + (μ/2)‖x − w‖²`.
    FedProx {
        mu: f64,
    },
    Rfa,
    CoordinateMedian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalRound {
    pub round: usize,
    pub active: Vec<usize>,
    pub global: ParamVector,
}

/// Runs `algorithm` for `settings.rounds` rounds and returns the global
/// model after each one.
pub fn run_classical(
    algorithm: Classical,
    settings: &RunSettings,
    weiszfeld: &WeiszfeldParams,
    tasks: &[PartyTask],
) -> Result<Vec<ClassicalRound>> {
    let dim = tasks
        .first()
        .map(PartyTask::dim)
        .ok_or_else(|| FedError::config("no parties"))?;
    let mut global = settings.init.draw(dim, settings.seed);
    let mut trace = Vec::with_capacity(settings.rounds);

    for k in 1..=settings.rounds {
        let mut selection = stream(settings.seed, &[domain::PARTY_SELECTION, k as u64]);
        let active = sample_parties(&settings.participation, tasks.len(), &mut selection);

        let mut locals = Vec::with_capacity(active.len());
        for &n in &active {
            let mut rng = stream(settings.seed, &[domain::LOCAL_SOLVE, n as u64, k as u64]);
            let objective = tasks[n].objective();
            let samples = objective.num_samples();
            let mut w = global.as_slice().to_vec();
            for step in 1..=settings.local_steps {
                let g = match settings.batch {
                    BatchSize::Full => objective.gradient(&ParamVector::new(w.clone()), None)?,
                    BatchSize::Mini(size) => {
                        let rows: Vec<usize> =
                            (0..size).map(|_| rng.random_range(0..samples)).collect();
                        objective.gradient(&ParamVector::new(w.clone()), Some(&rows))?
                    }
                };
                let lr = settings.learning_rate;
                match algorithm {
                    Classical::FedProx { mu } => {
                        for ((wi, gi), ci) in w.iter_mut().zip(g.iter()).zip(global.iter()) {
                            *wi -= lr * (gi + mu * (*wi - ci));
                        }
                    }
                    _ => {
                        for (wi, gi) in w.iter_mut().zip(g.iter()) {
                            *wi -= lr * gi;
                        }
                    }
                }
                if w.iter().any(|v| !v.is_finite()) {
                    return Err(FedError::Numerical {
                        round: k,
                        party: n,
                        step,
                    });
                }
            }
            locals.push(ParamVector::new(w));
        }

        let kind = match algorithm {
            Classical::FedAvg | Classical::FedProx { .. } => Centrality::Mean,
            Classical::Rfa => Centrality::GeometricMedian,
            Classical::CoordinateMedian => Centrality::CoordinateMedian,
        };
        global = aggregate::aggregate(kind, weiszfeld, &locals, None)?;
        trace.push(ClassicalRound {
            round: k,
            active,
            global: global.clone(),
        });
    }
    Ok(trace)
}

//! The round loop: sample parties, run their local solves, aggregate.
//!
//! Each round `k`:
//!
//! 1. sample the active set `P^k`,
//! 2. every active party runs Local-Solve against `x̂^{k-1}`, starting from
//!    its own previous model (persist) or from `x̂^{k-1}` (reset),
//! 3. the aggregator computes `x̂^k = C(·)` over the active parties' results.
//!
//! Inactive parties keep their models untouched. Local solves run on the
//! rayon pool; each one draws from its own `(party, round)` stream and the
//! results are gathered in party order, so traces do not depend on thread
//! scheduling.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::CentralitySpec;
use crate::error::{FedError, Result};
use crate::local::{
    local_solve, AlphaSchedule, BatchSize, LocalObjective, LocalSolveSpec, LogisticObjective,
    QuadraticObjective,
};
use crate::metrics::{aggregation_change, ChangeStats};
use crate::model;
use crate::param::{DistanceSpec, ParamVector};
use crate::rng::{domain, stream, StreamRng};
use crate::synth::SyntheticTask;

/// How a party picks its starting point at the beginning of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartMode {
    /// Continue from the party's own previous model.
    Persist,
    /// Restart from the current central model.
    Reset,
}

impl StartMode {
    pub fn name(self) -> &'static str {
        match self {
            StartMode::Persist => "persist",
            StartMode::Reset => "reset",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Participation {
    /// Each party joins independently with probability `p`.
    Bernoulli { p: f64 },
    /// Exactly `m` distinct parties, uniformly.
    FixedCount { m: usize },
}

impl Participation {
    pub fn validate(&self, parties: usize) -> Result<()> {
        match *self {
            Participation::Bernoulli { p } if !(p > 0.0 && p <= 1.0) => Err(FedError::config(
                format!("participation probability {p} not in (0, 1]"),
            )),
            Participation::FixedCount { m } if m == 0 || m > parties => Err(FedError::config(
                format!("cannot select {m} parties per round out of {parties}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Which models enter `C(·)` each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationScope {
    /// Only the models sent this round.
    #[default]
    Active,
    /// Every party's current model, including stale ones.
    All,
}

/// Shared initial model `x_n⁰` for every party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitSpec {
    Zeros,
    /// Entries uniform on `[-scale, scale]`, drawn once from the run seed.
    Uniform {
        scale: f64,
    },
}

impl InitSpec {
    pub fn draw(&self, dim: usize, seed: u64) -> ParamVector {
        match *self {
            InitSpec::Zeros => ParamVector::zeros(dim),
            InitSpec::Uniform { scale } => {
                let mut rng = stream(seed, &[domain::INIT]);
                ParamVector::new((0..dim).map(|_| rng.random_range(-scale..=scale)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationConfig {
    /// `K`.
    pub rounds: usize,
    pub participation: Participation,
    /// `T = p₂`.
    pub local_steps: usize,
    /// `γ`, shared by all parties.
    pub learning_rate: f64,
    pub batch: BatchSize,
    pub distance: DistanceSpec,
    pub alpha: AlphaSchedule,
    pub centrality: CentralitySpec,
    pub start_mode: StartMode,
    #[serde(default)]
    pub aggregation_scope: AggregationScope,
    pub init: InitSpec,
    /// Evaluate every `eval_every` rounds (and always at the last round).
    pub eval_every: usize,
    pub seed: u64,
}

impl FederationConfig {
    pub fn validate(&self, parties: usize, dim: usize) -> Result<()> {
        if parties == 0 {
            return Err(FedError::config("a federation needs at least one party"));
        }
        if self.eval_every == 0 {
            return Err(FedError::config("eval_every must be positive"));
        }
        if let InitSpec::Uniform { scale } = self.init {
            if !(scale.is_finite() && scale >= 0.0) {
                return Err(FedError::config("init scale must be finite and >= 0"));
            }
        }
        self.participation.validate(parties)?;
        self.alpha.validate()?;
        self.centrality.validate(parties)?;
        self.local_spec(1).validate(dim)
    }

    /// Local-Solve settings for round `k`.
    pub fn local_spec(&self, k: usize) -> LocalSolveSpec {
        LocalSolveSpec {
            steps: self.local_steps,
            gamma: self.learning_rate,
            alpha: self.alpha.at_round(k),
            batch: self.batch,
            distance: self.distance.clone(),
        }
    }

    /// Personalized runs are scored on each party's own model, the others on
    /// the central model.
    pub fn eval_target(&self) -> EvalTarget {
        match self.start_mode {
            StartMode::Persist => EvalTarget::Personal,
            StartMode::Reset => EvalTarget::Central,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalTarget {
    Personal,
    Central,
}

/// A party's private workload.
#[derive(Debug, Clone, PartialEq)]
pub enum PartyTask {
    Logistic(SyntheticTask),
    Quadratic { center: ParamVector },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartyEval {
    pub party: usize,
    pub train_loss: f64,
    /// Absent for workloads without a test split.
    pub test_accuracy: Option<f64>,
}

impl PartyTask {
    pub fn dim(&self) -> usize {
        match self {
            PartyTask::Logistic(t) => t.shape.dim(),
            PartyTask::Quadratic { center } => center.len(),
        }
    }

    pub fn objective(&self) -> Box<dyn LocalObjective + Send + Sync + '_> {
        match self {
            PartyTask::Logistic(t) => Box::new(LogisticObjective {
                shape: t.shape,
                batch: &t.train,
            }),
            PartyTask::Quadratic { center } => Box::new(QuadraticObjective { center }),
        }
    }

    pub fn evaluate(&self, party: usize, params: &ParamVector) -> Result<PartyEval> {
        match self {
            PartyTask::Logistic(t) => Ok(PartyEval {
                party,
                train_loss: model::loss(&t.shape, params, &t.train)?,
                test_accuracy: Some(model::accuracy(&t.shape, params, &t.test)?),
            }),
            PartyTask::Quadratic { center } => Ok(PartyEval {
                party,
                train_loss: model::quadratic_loss(center, params)?,
                test_accuracy: None,
            }),
        }
    }
}

pub fn logistic_tasks(tasks: Vec<SyntheticTask>) -> Vec<PartyTask> {
    tasks.into_iter().map(PartyTask::Logistic).collect()
}

pub fn quadratic_tasks(centers: Vec<ParamVector>) -> Vec<PartyTask> {
    centers
        .into_iter()
        .map(|center| PartyTask::Quadratic { center })
        .collect()
}

/// Everything observed in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub alpha: f64,
    /// Sorted party indices of `P^k`.
    pub active: Vec<usize>,
    pub x_hat_before: ParamVector,
    pub x_hat_after: ParamVector,
    /// `|after − before|` pooled over active parties and coordinates.
    pub change: ChangeStats,
    /// Same statistic per active party, aligned with `active`.
    pub party_changes: Vec<ChangeStats>,
    /// Per-party scores for all parties, on evaluation rounds only.
    pub evaluation: Option<Vec<PartyEval>>,
}

/// Draws the active set for one round, sorted ascending.
pub fn sample_parties(
    participation: &Participation,
    parties: usize,
    rng: &mut StreamRng,
) -> Vec<usize> {
    match *participation {
        Participation::FixedCount { m } => {
            let mut picked = index::sample(rng, parties, m.min(parties)).into_vec();
            picked.sort_unstable();
            picked
        }
        Participation::Bernoulli { p } => loop {
            let picked: Vec<usize> = (0..parties).filter(|_| rng.random_bool(p)).collect();
            if !picked.is_empty() {
                break picked;
            }
        },
    }
}

/// `α` used in round `k`.
pub fn advance_alpha(schedule: &AlphaSchedule, k: usize) -> f64 {
    schedule.at_round(k)
}

/// A federation in progress.
pub struct Federation<'a> {
    config: FederationConfig,
    tasks: &'a [PartyTask],
    models: Vec<ParamVector>,
    x_hat: ParamVector,
    round: usize,
}

impl<'a> Federation<'a> {
    /// Initializes every party to the shared `x⁰` and sets `x̂⁰ = C(X⁰)`.
    pub fn new(config: FederationConfig, tasks: &'a [PartyTask]) -> Result<Self> {
        let dim = tasks.first().map_or(0, PartyTask::dim);
        if let Some(bad) = tasks.iter().find(|t| t.dim() != dim) {
            return Err(FedError::Dimension {
                expected: dim,
                found: bad.dim(),
            });
        }
        config.validate(tasks.len(), dim)?;
        let init = config.init.draw(dim, config.seed);
        let models = vec![init; tasks.len()];
        let x_hat = config.centrality.aggregate(&models)?;
        Ok(Federation {
            config,
            tasks,
            models,
            x_hat,
            round: 0,
        })
    }

    pub fn config(&self) -> &FederationConfig {
        &self.config
    }

    /// Rounds completed so far.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn center(&self) -> &ParamVector {
        &self.x_hat
    }

    /// Each party's last locally computed model.
    pub fn models(&self) -> &[ParamVector] {
        &self.models
    }

    /// The point `party` would start its next local solve from.
    pub fn round_start(&self, party: usize) -> &ParamVector {
        match self.config.start_mode {
            StartMode::Persist => &self.models[party],
            StartMode::Reset => &self.x_hat,
        }
    }

    /// The model `party` is scored with.
    pub fn eval_model(&self, party: usize) -> &ParamVector {
        match self.config.eval_target() {
            EvalTarget::Personal => &self.models[party],
            EvalTarget::Central => &self.x_hat,
        }
    }

    pub fn evaluate(&self) -> Result<Vec<PartyEval>> {
        self.tasks
            .par_iter()
            .enumerate()
            .map(|(n, task)| task.evaluate(n, self.eval_model(n)))
            .collect()
    }

    /// Runs one round and returns its record.
    pub fn step(&mut self) -> Result<RoundRecord> {
        let k = self.round + 1;
        let cfg = self.config.clone();
        let spec = cfg.local_spec(k);
        let mut selection = stream(cfg.seed, &[domain::PARTY_SELECTION, k as u64]);
        let active = sample_parties(&cfg.participation, self.tasks.len(), &mut selection);

        let updates: Vec<ParamVector> = active
            .par_iter()
            .map(|&n| {
                let mut rng = stream(cfg.seed, &[domain::LOCAL_SOLVE, n as u64, k as u64]);
                let objective = self.tasks[n].objective();
                local_solve(
                    &spec,
                    objective.as_ref(),
                    self.round_start(n),
                    &self.x_hat,
                    &mut rng,
                )
                .map_err(|e| match e {
                    FedError::NonFinite { step } => FedError::Numerical {
                        round: k,
                        party: n,
                        step,
                    },
                    other => other,
                })
            })
            .collect::<Result<_>>()?;

        for (&n, x) in active.iter().zip(&updates) {
            self.models[n] = x.clone();
        }

        let x_hat_after = match cfg.aggregation_scope {
            AggregationScope::Active => {
                let weights = cfg.centrality.weights_for(&active);
                crate::aggregate::aggregate(
                    cfg.centrality.kind,
                    &cfg.centrality.weiszfeld,
                    &updates,
                    weights.as_deref(),
                )?
            }
            AggregationScope::All => cfg.centrality.aggregate(&self.models)?,
        };

        // What each active party effectively moves to because of the
        // aggregation: the centre itself under reset, and the γα-mix of its
        // model and the centre under persist.
        let mix = match cfg.start_mode {
            StartMode::Reset => 1.0,
            StartMode::Persist => (spec.gamma * spec.alpha).min(1.0),
        };
        let after: Vec<ParamVector> = updates
            .iter()
            .map(|x| mixed_towards(x, &x_hat_after, mix))
            .collect();
        let change = aggregation_change(&updates, &after)?;
        let party_changes = updates
            .iter()
            .zip(&after)
            .map(|(b, a)| aggregation_change(std::slice::from_ref(b), std::slice::from_ref(a)))
            .collect::<Result<Vec<_>>>()?;

        let x_hat_before = std::mem::replace(&mut self.x_hat, x_hat_after);
        self.round = k;

        let evaluation = if k.is_multiple_of(self.config.eval_every) || k == self.config.rounds {
            Some(self.evaluate()?)
        } else {
            None
        };

        Ok(RoundRecord {
            round: k,
            alpha: spec.alpha,
            active,
            x_hat_before,
            x_hat_after: self.x_hat.clone(),
            change,
            party_changes,
            evaluation,
        })
    }
}

fn mixed_towards(x: &ParamVector, center: &ParamVector, mix: f64) -> ParamVector {
    if mix == 1.0 {
        return center.clone();
    }
    ParamVector::new(
        x.iter()
            .zip(center.iter())
            .map(|(xi, ci)| xi + mix * (ci - xi))
            .collect(),
    )
}

/// Runs all `config.rounds` rounds and returns the full trace.
pub fn run_federation(config: &FederationConfig, tasks: &[PartyTask]) -> Result<Vec<RoundRecord>> {
    let mut fed = Federation::new(config.clone(), tasks)?;
    (0..config.rounds).map(|_| fed.step()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::Centrality;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec())
    }

    fn quad_config(start_mode: StartMode, alpha: f64) -> FederationConfig {
        FederationConfig {
            rounds: 5,
            participation: Participation::Bernoulli { p: 1.0 },
            local_steps: 3,
            learning_rate: 0.1,
            batch: BatchSize::Full,
            distance: DistanceSpec::SquaredL2,
            alpha: AlphaSchedule::constant(alpha),
            centrality: CentralitySpec::new(Centrality::Mean),
            start_mode,
            aggregation_scope: AggregationScope::Active,
            init: InitSpec::Zeros,
            eval_every: 1,
            seed: 3,
        }
    }

    fn centers(values: &[f64]) -> Vec<PartyTask> {
        quadratic_tasks(values.iter().map(|&c| pv(&[c, -c])).collect())
    }

    #[test]
    fn full_participation_selects_everyone() {
        let mut rng = stream(1, &[]);
        assert_eq!(
            sample_parties(&Participation::Bernoulli { p: 1.0 }, 6, &mut rng),
            (0..6).collect::<Vec<_>>()
        );
    }

    #[test]
    fn fixed_count_selects_distinct_parties() {
        let mut rng = stream(1, &[]);
        let picked = sample_parties(&Participation::FixedCount { m: 10 }, 1000, &mut rng);
        assert_eq!(picked.len(), 10);
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
        assert!(picked.iter().all(|&n| n < 1000));
        let again = sample_parties(
            &Participation::FixedCount { m: 10 },
            1000,
            &mut stream(1, &[]),
        );
        assert_eq!(picked, again);
    }

    #[test]
    fn bernoulli_never_returns_empty() {
        for seed in 0..200 {
            let picked = sample_parties(
                &Participation::Bernoulli { p: 0.05 },
                3,
                &mut stream(seed, &[]),
            );
            assert!(!picked.is_empty());
        }
    }

    #[test]
    fn single_party_centre_tracks_its_model() {
        let tasks = centers(&[2.0]);
        for mode in [StartMode::Persist, StartMode::Reset] {
            for alpha in [0.0, 0.5] {
                let records = run_federation(&quad_config(mode, alpha), &tasks).unwrap();
                let mut fed = Federation::new(quad_config(mode, alpha), &tasks).unwrap();
                for r in &records {
                    fed.step().unwrap();
                    assert_eq!(&r.x_hat_after, &fed.models()[0]);
                }
            }
        }
    }

    #[test]
    fn reset_mode_starts_every_party_at_the_centre() {
        let tasks = centers(&[0.0, 1.0, 4.0]);
        let mut fed = Federation::new(quad_config(StartMode::Reset, 0.5), &tasks).unwrap();
        for _ in 0..4 {
            fed.step().unwrap();
            for n in 0..3 {
                assert_eq!(fed.round_start(n), fed.center());
            }
        }
        let mut fed = Federation::new(quad_config(StartMode::Persist, 0.5), &tasks).unwrap();
        for _ in 0..4 {
            fed.step().unwrap();
        }
        let starts: Vec<_> = (0..3).map(|n| fed.round_start(n).clone()).collect();
        assert!(starts[0] != starts[1] && starts[1] != starts[2] && starts[0] != starts[2]);
        assert!(starts.iter().all(|s| s != fed.center()));
    }

    #[test]
    fn inactive_parties_are_untouched() {
        let tasks = centers(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut cfg = quad_config(StartMode::Persist, 0.3);
        cfg.participation = Participation::FixedCount { m: 2 };
        cfg.rounds = 20;
        let mut fed = Federation::new(cfg, &tasks).unwrap();
        for _ in 0..20 {
            let before = fed.models().to_vec();
            let rec = fed.step().unwrap();
            for n in 0..6 {
                if !rec.active.contains(&n) {
                    let (a, b) = (&before[n], &fed.models()[n]);
                    assert!(a
                        .iter()
                        .zip(b.iter())
                        .all(|(x, y)| x.to_bits() == y.to_bits()));
                }
            }
        }
    }

    #[test]
    fn traces_are_deterministic() {
        let tasks = centers(&[0.0, 1.0, 2.0, 7.0]);
        let mut cfg = quad_config(StartMode::Persist, 0.3);
        cfg.participation = Participation::Bernoulli { p: 0.5 };
        assert_eq!(
            run_federation(&cfg, &tasks).unwrap(),
            run_federation(&cfg, &tasks).unwrap()
        );
    }

    #[test]
    fn evaluation_cadence() {
        let tasks = centers(&[0.0, 1.0]);
        let mut cfg = quad_config(StartMode::Reset, 0.0);
        cfg.rounds = 7;
        cfg.eval_every = 3;
        let records = run_federation(&cfg, &tasks).unwrap();
        let evaluated: Vec<usize> = records
            .iter()
            .filter(|r| r.evaluation.is_some())
            .map(|r| r.round)
            .collect();
        assert_eq!(evaluated, vec![3, 6, 7]);
    }

    #[test]
    fn numerical_failure_names_round_and_party() {
        let tasks = centers(&[0.0, 1.0]);
        let mut cfg = quad_config(StartMode::Persist, 0.0);
        cfg.learning_rate = 1e155;
        cfg.local_steps = 50;
        match run_federation(&cfg, &tasks) {
            Err(FedError::Numerical {
                round: 1,
                party,
                step,
            }) => {
                assert!(party < 2 && step >= 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let tasks = centers(&[0.0, 1.0]);
        let mut cfg = quad_config(StartMode::Persist, 0.0);
        cfg.participation = Participation::FixedCount { m: 3 };
        assert!(matches!(
            Federation::new(cfg, &tasks),
            Err(FedError::Config(_))
        ));
        let mut cfg = quad_config(StartMode::Persist, 0.0);
        cfg.participation = Participation::Bernoulli { p: 0.0 };
        assert!(Federation::new(cfg, &tasks).is_err());
        let mut cfg = quad_config(StartMode::Persist, 0.0);
        cfg.eval_every = 0;
        assert!(Federation::new(cfg, &tasks).is_err());
        assert!(Federation::new(quad_config(StartMode::Persist, 0.0), &[]).is_err());
    }

    #[test]
    fn aggregating_all_parties_includes_stale_models() {
        let tasks = centers(&[0.0, 10.0, 20.0]);
        let mut cfg = quad_config(StartMode::Persist, 0.0);
        cfg.participation = Participation::FixedCount { m: 1 };
        cfg.aggregation_scope = AggregationScope::All;
        let mut fed = Federation::new(cfg, &tasks).unwrap();
        let rec = fed.step().unwrap();
        let expected = CentralitySpec::new(Centrality::Mean)
            .aggregate(fed.models())
            .unwrap();
        assert_eq!(rec.x_hat_after, expected);
    }

    #[test]
    fn persist_changes_are_smaller_than_reset_changes() {
        let tasks = centers(&[0.0, 3.0, 8.0]);
        let persist = run_federation(&quad_config(StartMode::Persist, 0.5), &tasks).unwrap();
        let reset = run_federation(&quad_config(StartMode::Reset, 0.0), &tasks).unwrap();
        for (p, r) in persist.iter().zip(&reset) {
            assert!(p.change.mean < r.change.mean);
        }
    }
}

//! The experiment file and its resolution into engine configurations.
//!
//! Experiment files are TOML. Unknown keys are rejected everywhere.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use fedplus_core::engine::{logistic_tasks, quadratic_tasks};
use fedplus_core::synth::{generate, quadratic_centers, CountLaw};
use fedplus_core::{
    AggregationScope, AlphaSchedule, BatchSize, Centrality, CentralitySpec, DistanceSpec,
    FederationConfig, InitSpec, ParamVector, Participation, PartyTask, Preset, PresetKnobs,
    RunSettings, StartMode, SynthSpec, WeiszfeldParams,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    /// Output directory; `--out` wins over it, and it wins over `FEDPLUS_OUT`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub dataset: Dataset,
    #[serde(default)]
    pub defaults: Defaults,
    #[serde(rename = "run")]
    pub runs: Vec<RunEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Dataset {
    Synthetic {
        zeta: f64,
        beta: f64,
        parties: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_features")]
        features: usize,
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default = "default_sigma_exponent")]
        sigma_exponent: f64,
        #[serde(default)]
        count_law: CountLaw,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
    },
    /// Either explicit `centers`, or `parties × dim` centers drawn uniformly
    /// on `[-spread, spread]`.
    Quadratic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        centers: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        parties: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spread: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
}

fn default_features() -> usize {
    60
}
fn default_classes() -> usize {
    10
}
fn default_sigma_exponent() -> f64 {
    1.2
}
fn default_train_fraction() -> f64 {
    0.8
}

/// `batch_size = 32` or `batch_size = "full"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchSetting {
    Size(usize),
    Named(FullBatch),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FullBatch {
    Full,
}

impl BatchSetting {
    fn resolve(self) -> Result<BatchSize, String> {
        match self {
            BatchSetting::Size(0) => Err("batch_size must be positive or \"full\"".into()),
            BatchSetting::Size(n) => Ok(BatchSize::Mini(n)),
            BatchSetting::Named(FullBatch::Full) => Ok(BatchSize::Full),
        }
    }
}

/// Settings shared by every run unless the run overrides them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Defaults {
    pub rounds: usize,
    pub local_steps: usize,
    pub learning_rate: f64,
    pub batch_size: BatchSetting,
    /// Exactly this many parties per round. Ignored when
    /// `participation_prob` is set.
    pub parties_per_round: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub participation_prob: Option<f64>,
    pub eval_every: usize,
    pub seed: u64,
    /// Uniform init on `[-init_scale, init_scale]`; 0 means zeros.
    pub init_scale: f64,
    pub alpha: f64,
    /// Geometric per-round decay of α; absent means constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_decay: Option<f64>,
    pub mu: f64,
    pub aggregation_scope: AggregationScope,
    pub weiszfeld: WeiszfeldParams,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            rounds: 100,
            local_steps: 20,
            learning_rate: 0.01,
            batch_size: BatchSetting::Size(32),
            parties_per_round: 10,
            participation_prob: None,
            eval_every: 1,
            seed: 0,
            init_scale: 0.0,
            alpha: 0.001,
            alpha_decay: None,
            mu: 1.0,
            aggregation_scope: AggregationScope::Active,
            weiszfeld: WeiszfeldParams::default(),
        }
    }
}

/// One `[[run]]`. `preset` names one of the presets or is `"custom"`, in
/// which case `centrality` and `start_mode` are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<BatchSetting>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centrality: Option<Centrality>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_mode: Option<StartMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation_scope: Option<AggregationScope>,
    /// Diagonal of `Q` in the penalty; absent means squared L2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_diag: Option<Vec<f64>>,
    /// Per-party aggregation weights; absent means uniform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rounds: Option<usize>,
}

/// A run ready to execute.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub name: String,
    /// Preset label written to artifacts, `custom` for custom runs.
    pub label: String,
    pub config: FederationConfig,
}

pub fn parse(text: &str) -> Result<ExperimentFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

impl ExperimentFile {
    /// Applies the overrides and makes every default explicit, so the result
    /// serializes to a self-contained snapshot.
    pub fn resolved(&self, overrides: Overrides) -> ExperimentFile {
        let mut file = self.clone();
        file.out_dir = None;
        if let Some(seed) = overrides.seed {
            file.defaults.seed = seed;
            match &mut file.dataset {
                Dataset::Synthetic { seed: s, .. } | Dataset::Quadratic { seed: s, .. } => {
                    *s = seed
                }
            }
        }
        if let Some(rounds) = overrides.rounds {
            file.defaults.rounds = rounds;
            for run in &mut file.runs {
                run.rounds = None;
            }
        }
        for run in &mut file.runs {
            if run.name.is_none() {
                run.name = Some(run.preset.clone());
            }
        }
        file
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("cannot write snapshot: {e}")))
    }

    /// Builds the party tasks described by `[dataset]`.
    pub fn tasks(&self) -> Result<Vec<PartyTask>, CliError> {
        let key = |e: fedplus_core::FedError| CliError::Config(format!("[dataset]: {e}"));
        match &self.dataset {
            Dataset::Synthetic { .. } => {
                Ok(logistic_tasks(generate(&self.synth_spec()?).map_err(key)?))
            }
            Dataset::Quadratic { .. } => Ok(quadratic_tasks(self.centers()?)),
        }
    }

    pub fn synth_spec(&self) -> Result<SynthSpec, CliError> {
        match &self.dataset {
            Dataset::Synthetic {
                zeta,
                beta,
                parties,
                seed,
                features,
                classes,
                sigma_exponent,
                count_law,
                train_fraction,
            } => {
                let spec = SynthSpec {
                    zeta: *zeta,
                    beta: *beta,
                    parties: *parties,
                    features: *features,
                    classes: *classes,
                    sigma_exponent: *sigma_exponent,
                    count_law: *count_law,
                    train_fraction: *train_fraction,
                    seed: *seed,
                };
                spec.validate()
                    .map_err(|e| CliError::Config(format!("[dataset]: {e}")))?;
                Ok(spec)
            }
            Dataset::Quadratic { .. } => Err(CliError::Config(
                "[dataset]: kind is not `synthetic`".into(),
            )),
        }
    }

    pub fn centers(&self) -> Result<Vec<ParamVector>, CliError> {
        let Dataset::Quadratic {
            centers,
            parties,
            dim,
            spread,
            seed,
        } = &self.dataset
        else {
            return Err(CliError::Config(
                "[dataset]: kind is not `quadratic`".into(),
            ));
        };
        match (centers, parties, dim, spread) {
            (Some(c), None, None, None) => {
                let d = c.first().map_or(0, Vec::len);
                if d == 0 || c.iter().any(|v| v.len() != d) {
                    return Err(CliError::Config(
                        "[dataset].centers must be non-empty rows of equal, positive length".into(),
                    ));
                }
                Ok(c.iter().cloned().map(ParamVector::new).collect())
            }
            (None, Some(n), Some(d), s) => quadratic_centers(*n, *d, s.unwrap_or(1.0), *seed)
                .map_err(|e| CliError::Config(format!("[dataset]: {e}"))),
            _ => Err(CliError::Config(
                "[dataset]: give either `centers` or `parties` and `dim` (with optional `spread`)"
                    .into(),
            )),
        }
    }

    /// Resolves every run, failing on the first invalid one.
    pub fn runs(&self, tasks: &[PartyTask]) -> Result<Vec<ResolvedRun>, CliError> {
        if self.runs.is_empty() {
            return Err(CliError::Config("no [[run]] entries".into()));
        }
        let parties = tasks.len();
        let dim = tasks.first().map_or(0, PartyTask::dim);
        let mut names = BTreeSet::new();
        let mut out = Vec::with_capacity(self.runs.len());
        for (i, entry) in self.runs.iter().enumerate() {
            let name = entry.name.clone().unwrap_or_else(|| entry.preset.clone());
            let at = |msg: String| CliError::Config(format!("run[{i}] `{name}`: {msg}"));
            if name.is_empty()
                || !name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '+' | '.'))
                || name.starts_with('.')
            {
                return Err(at(
                    "name may only use letters, digits, `_`, `-`, `+` and `.`".into(),
                ));
            }
            if !names.insert(name.clone()) {
                return Err(at("duplicate run name".into()));
            }
            let (label, config) = self.run_config(entry).map_err(&at)?;
            config
                .validate(parties, dim)
                .map_err(|e| at(e.to_string()))?;
            out.push(ResolvedRun {
                name,
                label,
                config,
            });
        }
        Ok(out)
    }

    fn run_config(&self, entry: &RunEntry) -> Result<(String, FederationConfig), String> {
        let d = &self.defaults;
        let participation = match d.participation_prob {
            Some(p) => Participation::Bernoulli { p },
            None => Participation::FixedCount {
                m: d.parties_per_round,
            },
        };
        let settings = RunSettings {
            rounds: entry.rounds.unwrap_or(d.rounds),
            participation,
            local_steps: entry.local_steps.unwrap_or(d.local_steps),
            learning_rate: entry.learning_rate.unwrap_or(d.learning_rate),
            batch: entry.batch_size.unwrap_or(d.batch_size).resolve()?,
            init: if d.init_scale == 0.0 {
                InitSpec::Zeros
            } else {
                InitSpec::Uniform {
                    scale: d.init_scale,
                }
            },
            eval_every: d.eval_every,
            seed: d.seed,
        };
        let alpha0 = entry.alpha.unwrap_or(d.alpha);
        let alpha = match entry.alpha_decay.or(d.alpha_decay) {
            Some(decay) => AlphaSchedule::GeometricDecay { alpha0, decay },
            None => AlphaSchedule::constant(alpha0),
        };
        let knobs = PresetKnobs {
            alpha,
            mu: entry.mu.unwrap_or(d.mu),
            weiszfeld: d.weiszfeld,
        };
        let scope = entry.aggregation_scope.unwrap_or(d.aggregation_scope);

        if entry.preset == "custom" {
            let kind = entry.centrality.ok_or("custom runs need `centrality`")?;
            let start_mode = entry.start_mode.ok_or("custom runs need `start_mode`")?;
            if entry.mu.is_some() {
                return Err("`mu` only applies to fedprox; set `alpha` for custom runs".into());
            }
            let mut config = Preset::FedAvg.configure(&settings, &knobs);
            config.alpha = alpha;
            config.centrality = CentralitySpec {
                kind,
                weights: entry.weights.clone(),
                weiszfeld: d.weiszfeld,
            };
            config.start_mode = start_mode;
            config.aggregation_scope = scope;
            config.distance = match &entry.q_diag {
                Some(q) => DistanceSpec::ScaledQ { q_diag: q.clone() },
                None => DistanceSpec::SquaredL2,
            };
            return Ok(("custom".into(), config));
        }

        let preset: Preset = entry.preset.parse().map_err(|_| {
            let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
            format!(
                "unknown preset `{}`; valid presets: {}, custom",
                entry.preset,
                names.join(", ")
            )
        })?;
        for (set, key) in [
            (entry.centrality.is_some(), "centrality"),
            (entry.start_mode.is_some(), "start_mode"),
            (entry.q_diag.is_some(), "q_diag"),
            (entry.weights.is_some(), "weights"),
        ] {
            if set {
                return Err(format!(
                    "`{key}` is fixed by preset `{preset}`; use preset = \"custom\""
                ));
            }
        }
        let mut config = preset.configure(&settings, &knobs);
        config.aggregation_scope = scope;
        Ok((preset.name().into(), config))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[dataset]
kind = "quadratic"
parties = 4
dim = 3

[defaults]
rounds = 3
parties_per_round = 2
batch_size = "full"

[[run]]
preset = "fedavg+"
"#;

    #[test]
    fn parses_and_resolves_minimal_file() {
        let file = parse(MINIMAL).unwrap();
        let tasks = file.tasks().unwrap();
        let runs = file.runs(&tasks).unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].name, "fedavg+");
        assert_eq!(runs[0].config.start_mode, StartMode::Persist);
        assert_eq!(runs[0].config.batch, BatchSize::Full);
    }

    #[test]
    fn unknown_keys_report_the_line() {
        let err = parse(&MINIMAL.replace("rounds = 3", "roundz = 3"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("roundz") && err.contains("line"), "{err}");
    }

    #[test]
    fn snapshot_is_self_contained_and_stable() {
        let file = parse(MINIMAL).unwrap();
        let snap = file.resolved(Overrides {
            seed: Some(5),
            rounds: Some(9),
        });
        let text = snap.to_toml().unwrap();
        let back = parse(&text).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.resolved(Overrides::default()), snap);
        assert_eq!(back.defaults.rounds, 9);
        assert!(text.contains("name = \"fedavg+\""));
    }

    #[test]
    fn custom_runs_need_their_bindings() {
        let text = MINIMAL.replace(
            "preset = \"fedavg+\"",
            "preset = \"custom\"\ncentrality = \"coordinate-median\"",
        );
        let file = parse(&text).unwrap();
        let err = file.runs(&file.tasks().unwrap()).unwrap_err().to_string();
        assert!(err.contains("start_mode"), "{err}");

        let text = format!("{text}start_mode = \"persist\"\nq_diag = [1.0, 2.0, 3.0]\n");
        let file = parse(&text).unwrap();
        let runs = file.runs(&file.tasks().unwrap()).unwrap();
        assert_eq!(runs[0].label, "custom");
        assert_eq!(runs[0].config.centrality.kind, Centrality::CoordinateMedian);
    }

    #[test]
    fn preset_bindings_cannot_be_overridden() {
        let text = MINIMAL.replace(
            "preset = \"fedavg+\"",
            "preset = \"rfa\"\nstart_mode = \"persist\"",
        );
        let file = parse(&text).unwrap();
        assert!(file.runs(&file.tasks().unwrap()).is_err());
    }
}

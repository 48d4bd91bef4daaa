//! Named parameterizations of the generic engine.
//!
//! | preset    | B          | C                 | start   | α        |
//! |-----------|------------|-------------------|---------|----------|
//! | fedavg    | squared-l2 | mean              | reset   | 0        |
//! | fedprox   | squared-l2 | mean              | reset   | μ > 0    |
//! | rfa       | squared-l2 | geometric-median  | reset   | 0        |
//! | cmedian   | squared-l2 | coordinate-median | reset   | 0        |
//! | fedavg+   | squared-l2 | mean              | persist | schedule |
//! | rfa+      | squared-l2 | geometric-median  | persist | schedule |
//! | cmedian+  | squared-l2 | coordinate-median | persist | schedule |

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::aggregate::{Centrality, CentralitySpec, WeiszfeldParams};
use crate::engine::{AggregationScope, FederationConfig, InitSpec, Participation, StartMode};
use crate::error::{FedError, Result};
use crate::local::{AlphaSchedule, BatchSize};
use crate::param::DistanceSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "fedprox")]
    FedProx,
    #[serde(rename = "rfa")]
    Rfa,
    #[serde(rename = "cmedian")]
    CMedian,
    #[serde(rename = "fedavg+")]
    FedAvgPlus,
    #[serde(rename = "rfa+")]
    RfaPlus,
    #[serde(rename = "cmedian+")]
    CMedianPlus,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::FedAvg,
        Preset::FedProx,
        Preset::Rfa,
        Preset::CMedian,
        Preset::FedAvgPlus,
        Preset::RfaPlus,
        Preset::CMedianPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::FedAvg => "fedavg",
            Preset::FedProx => "fedprox",
            Preset::Rfa => "rfa",
            Preset::CMedian => "cmedian",
            Preset::FedAvgPlus => "fedavg+",
            Preset::RfaPlus => "rfa+",
            Preset::CMedianPlus => "cmedian+",
        }
    }

    pub fn is_personalized(self) -> bool {
        matches!(
            self,
            Preset::FedAvgPlus | Preset::RfaPlus | Preset::CMedianPlus
        )
    }

    pub fn centrality(self) -> Centrality {
        match self {
            Preset::FedAvg | Preset::FedProx | Preset::FedAvgPlus => Centrality::Mean,
            Preset::Rfa | Preset::RfaPlus => Centrality::GeometricMedian,
            Preset::CMedian | Preset::CMedianPlus => Centrality::CoordinateMedian,
        }
    }

    pub fn start_mode(self) -> StartMode {
        if self.is_personalized() {
            StartMode::Persist
        } else {
            StartMode::Reset
        }
    }

    /// The single-model baseline a personalized preset extends.
    pub fn baseline(self) -> Preset {
        match self {
            Preset::FedAvgPlus => Preset::FedAvg,
            Preset::RfaPlus => Preset::Rfa,
            Preset::CMedianPlus => Preset::CMedian,
            other => other,
        }
    }

    /// The personalized counterpart of a baseline.
    pub fn personalized(self) -> Preset {
        match self {
            Preset::FedAvg | Preset::FedProx => Preset::FedAvgPlus,
            Preset::Rfa => Preset::RfaPlus,
            Preset::CMedian => Preset::CMedianPlus,
            other => other,
        }
    }

    /// Expands the preset over the shared `settings`.
    pub fn configure(self, settings: &RunSettings, knobs: &PresetKnobs) -> FederationConfig {
        let alpha = match self {
            Preset::FedAvg | Preset::Rfa | Preset::CMedian => AlphaSchedule::constant(0.0),
            Preset::FedProx => AlphaSchedule::constant(knobs.mu),
            Preset::FedAvgPlus | Preset::RfaPlus | Preset::CMedianPlus => knobs.alpha,
        };
        FederationConfig {
            rounds: settings.rounds,
            participation: settings.participation,
            local_steps: settings.local_steps,
            learning_rate: settings.learning_rate,
            batch: settings.batch,
            distance: DistanceSpec::SquaredL2,
            alpha,
            centrality: CentralitySpec {
                kind: self.centrality(),
                weights: None,
                weiszfeld: knobs.weiszfeld,
            },
            start_mode: self.start_mode(),
            aggregation_scope: AggregationScope::Active,
            init: settings.init,
            eval_every: settings.eval_every,
            seed: settings.seed,
        }
    }

    /// Recognizes a configuration as one of the presets, if it is one.
    pub fn classify(config: &FederationConfig) -> Option<Preset> {
        if config.distance != DistanceSpec::SquaredL2 || config.centrality.weights.is_some() {
            return None;
        }
        let alpha = config.alpha;
        let zero = matches!(alpha, AlphaSchedule::Constant { alpha } if alpha == 0.0);
        let constant_positive = matches!(alpha, AlphaSchedule::Constant { alpha } if alpha > 0.0);
        let kind = config.centrality.kind;
        match config.start_mode {
            StartMode::Reset if zero => Some(match kind {
                Centrality::Mean => Preset::FedAvg,
                Centrality::GeometricMedian => Preset::Rfa,
                Centrality::CoordinateMedian => Preset::CMedian,
            }),
            StartMode::Reset if constant_positive && kind == Centrality::Mean => {
                Some(Preset::FedProx)
            }
            StartMode::Reset => None,
            StartMode::Persist => match kind {
                Centrality::Mean if matches!(alpha, AlphaSchedule::Constant { .. }) => {
                    Some(Preset::FedAvgPlus)
                }
                Centrality::Mean => None,
                Centrality::GeometricMedian if alpha.initial() > 0.0 => Some(Preset::RfaPlus),
                Centrality::CoordinateMedian if alpha.initial() > 0.0 => Some(Preset::CMedianPlus),
                _ => None,
            },
        }
    }

    /// One-line description of the parameter bindings.
    pub fn describe(self) -> String {
        let alpha = match self {
            Preset::FedAvg | Preset::Rfa | Preset::CMedian => "0",
            Preset::FedProx => "mu",
            _ => "schedule",
        };
        format!(
            "{:<9} distance=squared-l2 centrality={} start_mode={} alpha={}",
            self.name(),
            self.centrality().name(),
            self.start_mode().name(),
            alpha
        )
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = FedError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                FedError::config(format!(
                    "unknown preset `{s}`; valid presets: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Settings shared by every preset in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub rounds: usize,
    pub participation: Participation,
    pub local_steps: usize,
    pub learning_rate: f64,
    pub batch: BatchSize,
    pub init: InitSpec,
    pub eval_every: usize,
    pub seed: u64,
}

/// Penalty settings consumed by the presets that use them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetKnobs {
    /// α schedule of the personalized presets.
    pub alpha: AlphaSchedule,
    /// FedProx proximal coefficient.
    pub mu: f64,
    #[serde(default)]
    pub weiszfeld: WeiszfeldParams,
}

impl Default for PresetKnobs {
    fn default() -> Self {
        PresetKnobs {
            alpha: AlphaSchedule::constant(0.001),
            mu: 1.0,
            weiszfeld: WeiszfeldParams::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> RunSettings {
        RunSettings {
            rounds: 3,
            participation: Participation::FixedCount { m: 2 },
            local_steps: 4,
            learning_rate: 0.01,
            batch: BatchSize::Mini(32),
            init: InitSpec::Zeros,
            eval_every: 1,
            seed: 1,
        }
    }

    #[test]
    fn presets_round_trip_through_names_and_classification() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
            let cfg = p.configure(&settings(), &PresetKnobs::default());
            assert_eq!(Preset::classify(&cfg), Some(p), "{p}");
        }
    }

    #[test]
    fn unknown_preset_lists_valid_names() {
        let err = "fedsgd".parse::<Preset>().unwrap_err().to_string();
        for p in Preset::ALL {
            assert!(err.contains(p.name()));
        }
    }

    #[test]
    fn bindings() {
        let knobs = PresetKnobs::default();
        let prox = Preset::FedProx.configure(&settings(), &knobs);
        assert_eq!(prox.alpha, AlphaSchedule::constant(1.0));
        assert_eq!(prox.start_mode, StartMode::Reset);
        let plus = Preset::RfaPlus.configure(&settings(), &knobs);
        assert_eq!(plus.alpha, AlphaSchedule::constant(0.001));
        assert_eq!(plus.start_mode, StartMode::Persist);
        assert_eq!(plus.centrality.kind, Centrality::GeometricMedian);
        for p in Preset::ALL {
            let line = p.describe();
            let mode = if p.is_personalized() {
                "start_mode=persist"
            } else {
                "start_mode=reset"
            };
            assert!(line.contains(mode), "{line}");
        }
    }

    #[test]
    fn non_preset_configs_are_not_classified() {
        let mut cfg = Preset::FedAvgPlus.configure(&settings(), &PresetKnobs::default());
        cfg.distance = DistanceSpec::ScaledQ { q_diag: vec![1.0] };
        assert_eq!(Preset::classify(&cfg), None);
        let mut cfg = Preset::Rfa.configure(&settings(), &PresetKnobs::default());
        cfg.alpha = AlphaSchedule::constant(0.5);
        assert_eq!(Preset::classify(&cfg), None);
    }
}

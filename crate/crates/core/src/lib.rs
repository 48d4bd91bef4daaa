//! Fed+ federated learning.
//!
//! Parties minimize their own loss plus a proximal pull `α B(x_n, C(X))`
//! towards a central point computed by the aggregator. Choosing the distance
//! `B`, the centrality `C`, the start mode and the `α` schedule recovers
//! FedAvg, FedProx, RFA and coordinate-wise median, along with their
//! personalized variants (see [`presets`]).

pub mod aggregate;
pub mod baseline;
pub mod engine;
pub mod error;
pub mod local;
pub mod metrics;
pub mod model;
pub mod param;
pub mod presets;
pub mod rng;
pub mod synth;

pub use aggregate::{Centrality, CentralitySpec, WeiszfeldParams};
pub use engine::{
    run_federation, AggregationScope, EvalTarget, Federation, FederationConfig, InitSpec,
    Participation, PartyEval, PartyTask, RoundRecord, StartMode,
};
pub use error::{FedError, Result};
pub use local::{AlphaSchedule, BatchSize, LocalSolveSpec};
pub use metrics::{ChangeStats, RoundRow, RunSummary};
pub use model::{Batch, LogisticShape};
pub use param::{DistanceSpec, ParamVector};
pub use presets::{Preset, PresetKnobs, RunSettings};
pub use synth::{CountLaw, SynthSpec, SyntheticTask};

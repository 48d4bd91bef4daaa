//! Party-side Local-Solve: `T` penalized gradient steps
//! `x ← x − γ (∇f(x) + α ∇B(x, x̂))` with `x̂` held fixed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, FedError, Result};
use crate::model::{self, Batch, LogisticShape};
use crate::param::{distance_grad, DistanceSpec, ParamVector};
use crate::rng::StreamRng;

/// A local loss `f_n` that can report (minibatch) gradients.
pub trait LocalObjective {
    fn dim(&self) -> usize;

    /// Number of samples available for minibatching.
    fn num_samples(&self) -> usize;

    fn loss(&self, params: &ParamVector) -> Result<f64>;

    /// Gradient over the given sample indices, or over all samples when
    /// `rows` is `None`.
    fn gradient(&self, params: &ParamVector, rows: Option<&[usize]>) -> Result<ParamVector>;
}

/// Logistic regression on a party's training batch.
#[derive(Debug, Clone, Copy)]
pub struct LogisticObjective<'a> {
    pub shape: LogisticShape,
    pub batch: &'a Batch,
}

impl LocalObjective for LogisticObjective<'_> {
    fn dim(&self) -> usize {
        self.shape.dim()
    }

    fn num_samples(&self) -> usize {
        self.batch.len()
    }

    fn loss(&self, params: &ParamVector) -> Result<f64> {
        model::loss(&self.shape, params, self.batch)
    }

    fn gradient(&self, params: &ParamVector, rows: Option<&[usize]>) -> Result<ParamVector> {
        match rows {
            None => model::grad(&self.shape, params, self.batch),
            Some(rows) => {
                check_len(self.shape.dim(), params.len())?;
                if rows.is_empty() || rows.iter().any(|&i| i >= self.batch.len()) {
                    return Err(FedError::Data("minibatch rows out of range".into()));
                }
                Ok(model::grad_rows(&self.shape, params, self.batch, rows))
            }
        }
    }
}

/// `½‖x − c‖²`; a single deterministic "sample".
#[derive(Debug, Clone, Copy)]
pub struct QuadraticObjective<'a> {
    pub center: &'a ParamVector,
}

impl LocalObjective for QuadraticObjective<'_> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn num_samples(&self) -> usize {
        1
    }

    fn loss(&self, params: &ParamVector) -> Result<f64> {
        model::quadratic_loss(self.center, params)
    }

    fn gradient(&self, params: &ParamVector, _rows: Option<&[usize]>) -> Result<ParamVector> {
        model::quadratic_grad(self.center, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchSize {
    Full,
    /// Uniform sampling with replacement.
    Mini(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSolveSpec {
    /// Local iterations per round (`p₂`).
    pub steps: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub batch: BatchSize,
    pub distance: DistanceSpec,
}

impl LocalSolveSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(FedError::config(
                "learning rate must be positive and finite",
            ));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(FedError::config("alpha must be finite and >= 0"));
        }
        if self.batch == BatchSize::Mini(0) {
            return Err(FedError::config("batch size must be positive"));
        }
        self.distance.validate(dim)
    }
}

/// Per-round penalty strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlphaSchedule {
    Constant { alpha: f64 },
    GeometricDecay { alpha0: f64, decay: f64 },
}

impl AlphaSchedule {
    pub fn constant(alpha: f64) -> Self {
        AlphaSchedule::Constant { alpha }
    }

    /// `α¹ = alpha0`, `α^{k+1} = decay · α^k`.
    pub fn decaying(alpha0: f64, decay: f64) -> Self {
        AlphaSchedule::GeometricDecay { alpha0, decay }
    }

    pub fn initial(&self) -> f64 {
        match *self {
            AlphaSchedule::Constant { alpha } => alpha,
            AlphaSchedule::GeometricDecay { alpha0, .. } => alpha0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial().is_finite() && self.initial() >= 0.0) {
            return Err(FedError::config("alpha must be finite and >= 0"));
        }
        if let AlphaSchedule::GeometricDecay { decay, .. } = *self {
            if !(decay > 0.0 && decay <= 1.0) {
                return Err(FedError::config("alpha decay must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Penalty strength in round `k` (1-based).
    pub fn at_round(&self, k: usize) -> f64 {
        match *self {
            AlphaSchedule::Constant { alpha } => alpha,
            AlphaSchedule::GeometricDecay { alpha0, decay } => {
                alpha0 * decay.powi(k.saturating_sub(1) as i32)
            }
        }
    }
}

/// Runs `spec.steps` penalized gradient steps from `x_start` towards the
/// fixed centre `x_hat`. A zero `alpha` skips the penalty term entirely.
pub fn local_solve<O: LocalObjective + ?Sized>(
    spec: &LocalSolveSpec,
    objective: &O,
    x_start: &ParamVector,
    x_hat: &ParamVector,
    rng: &mut StreamRng,
) -> Result<ParamVector> {
    check_len(objective.dim(), x_start.len())?;
    check_len(objective.dim(), x_hat.len())?;
    spec.validate(objective.dim())?;

    let mut x = x_start.clone();
    let mut rows = Vec::new();
    for step in 1..=spec.steps {
        let g = match spec.batch {
            BatchSize::Full => objective.gradient(&x, None)?,
            BatchSize::Mini(size) => {
                let n = objective.num_samples();
                rows.clear();
                rows.extend((0..size).map(|_| rng.random_range(0..n)));
                objective.gradient(&x, Some(&rows))?
            }
        };
        x = if spec.alpha != 0.0 {
            let pull = distance_grad(&spec.distance, &x, x_hat)?;
            penalized_step(&x, &g, &pull, spec.gamma, spec.alpha)
        } else {
            ParamVector::new(
                x.iter()
                    .zip(g.iter())
                    .map(|(xi, gi)| xi - spec.gamma * gi)
                    .collect(),
            )
        };
        if !x.is_finite() {
            return Err(FedError::NonFinite { step });
        }
    }
    Ok(x)
}

/// `x − γ (g + α · pull)`, where `pull = ∇B(x, x̂)`.
pub fn penalized_step(
    x: &ParamVector,
    g: &ParamVector,
    pull: &ParamVector,
    gamma: f64,
    alpha: f64,
) -> ParamVector {
    ParamVector::new(
        x.iter()
            .zip(g.iter())
            .zip(pull.iter())
            .map(|((xi, gi), pi)| xi - gamma * (gi + alpha * pi))
            .collect(),
    )
}

/// The squared-L2 step written as a convex combination:
/// `(1 − γα) x + γα x̂ − γ ∇f`.
pub fn convex_combination_step(
    x: &ParamVector,
    x_hat: &ParamVector,
    gamma: f64,
    alpha: f64,
    grad_f: &ParamVector,
) -> Result<ParamVector> {
    check_len(x.len(), x_hat.len())?;
    check_len(x.len(), grad_f.len())?;
    let mix = gamma * alpha;
    Ok(ParamVector::new(
        x.iter()
            .zip(x_hat.iter())
            .zip(grad_f.iter())
            .map(|((xi, ci), gi)| (1.0 - mix) * xi + mix * ci - gamma * gi)
            .collect(),
    ))
}

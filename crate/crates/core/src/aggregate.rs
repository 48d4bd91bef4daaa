//! Centrality functions `C(X)` used by the aggregator: weighted mean,
//! geometric median (smoothed Weiszfeld) and coordinate-wise median.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, FedError, Result};
use crate::param::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centrality {
    Mean,
    GeometricMedian,
    CoordinateMedian,
}

impl Centrality {
    pub fn name(self) -> &'static str {
        match self {
            Centrality::Mean => "mean",
            Centrality::GeometricMedian => "geometric-median",
            Centrality::CoordinateMedian => "coordinate-median",
        }
    }
}

/// Stopping rules for the Weiszfeld solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeiszfeldParams {
    pub max_iters: usize,
    /// Stop once successive iterates are closer than this in L2.
    pub tol: f64,
    /// Lower bound on the distances used as reweighting denominators.
    pub smoothing: f64,
}

impl Default for WeiszfeldParams {
    fn default() -> Self {
        WeiszfeldParams {
            max_iters: 64,
            tol: 1e-10,
            smoothing: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentralitySpec {
    pub kind: Centrality,
    /// Per-party weights; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub weiszfeld: WeiszfeldParams,
}

impl CentralitySpec {
    pub fn new(kind: Centrality) -> Self {
        CentralitySpec {
            kind,
            weights: None,
            weiszfeld: WeiszfeldParams::default(),
        }
    }

    pub fn validate(&self, parties: usize) -> Result<()> {
        if let Some(w) = &self.weights {
            check_weights(w)?;
            if w.len() != parties {
                return Err(FedError::config(format!(
                    "{} centrality weights given for {parties} parties",
                    w.len()
                )));
            }
        }
        let p = &self.weiszfeld;
        if p.max_iters == 0 || !(p.tol > 0.0) || !(p.smoothing > 0.0) {
            return Err(FedError::config(
                "weiszfeld max_iters, tol and smoothing must be positive",
            ));
        }
        Ok(())
    }

    /// Weights for the parties listed in `members`, in that order.
    pub fn weights_for(&self, members: &[usize]) -> Option<Vec<f64>> {
        self.weights
            .as_ref()
            .map(|w| members.iter().map(|&n| w[n]).collect())
    }

    /// Aggregates `models` using `self.weights` (which must then
    /// cover exactly these models).
    pub fn aggregate(&self, models: &[ParamVector]) -> Result<ParamVector> {
        aggregate(self.kind, &self.weiszfeld, models, self.weights.as_deref())
    }
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(FedError::config(
            "centrality weights must be positive and finite",
        ));
    }
    Ok(())
}

fn resolve_weights(n: usize, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0; n]),
        Some(w) => {
            check_len(n, w.len())?;
            check_weights(w)?;
            Ok(w.to_vec())
        }
    }
}

fn check_models(models: &[ParamVector]) -> Result<usize> {
    let first = models
        .first()
        .ok_or_else(|| FedError::Aggregation("no models to aggregate".into()))?;
    for m in &models[1..] {
        check_len(first.len(), m.len())?;
    }
    Ok(first.len())
}

/// Computes the central point of `models`.
pub fn aggregate(
    kind: Centrality,
    weiszfeld: &WeiszfeldParams,
    models: &[ParamVector],
    weights: Option<&[f64]>,
) -> Result<ParamVector> {
    check_models(models)?;
    let w = resolve_weights(models.len(), weights)?;
    match kind {
        Centrality::Mean => Ok(weighted_mean(models, &w)),
        Centrality::GeometricMedian => Ok(weiszfeld_with_weights(models, &w, weiszfeld).point),
        Centrality::CoordinateMedian => Ok(coordinate_median(models, &w)),
    }
}

// Running (West) update so that identical inputs reproduce themselves exactly.
fn weighted_mean(models: &[ParamVector], w: &[f64]) -> ParamVector {
    let mut mean = models[0].as_slice().to_vec();
    let mut total = w[0];
    for (m, &wn) in models.iter().zip(w).skip(1) {
        total += wn;
        let r = wn / total;
        for (acc, x) in mean.iter_mut().zip(m.iter()) {
            *acc += r * (x - *acc);
        }
    }
    ParamVector::new(mean)
}

/// Per-coordinate weighted median. With an even total weight split exactly
/// in half the lower of the two middle values is returned.
fn coordinate_median(models: &[ParamVector], w: &[f64]) -> ParamVector {
    let dim = models[0].len();
    let total: f64 = w.iter().sum();
    let mut column: Vec<(f64, f64)> = Vec::with_capacity(models.len());
    let out = (0..dim)
        .map(|d| {
            column.clear();
            column.extend(models.iter().zip(w).map(|(m, &wn)| (m[d], wn)));
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut cum = 0.0;
            for &(v, wn) in &column {
                cum += wn;
                if 2.0 * cum >= total {
                    return v;
                }
            }
            column[column.len() - 1].0
        })
        .collect();
    ParamVector::new(out)
}

/// `Σ w_n ‖z − x_n‖`, with unit weights when `weights` is `None`.
pub fn geometric_median_objective(
    z: &ParamVector,
    models: &[ParamVector],
    weights: Option<&[f64]>,
) -> Result<f64> {
    for m in models {
        check_len(z.len(), m.len())?;
    }
    let w = resolve_weights(models.len(), weights)?;
    Ok(objective_unchecked(z.as_slice(), models, &w))
}

fn objective_unchecked(z: &[f64], models: &[ParamVector], w: &[f64]) -> f64 {
    models
        .iter()
        .zip(w)
        .map(|(m, wn)| wn * euclid(z, m.as_slice()))
        .sum()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Outcome of a Weiszfeld solve, including the objective after each
/// accepted iterate (`objectives[0]` is the weighted-mean start).
#[derive(Debug, Clone)]
pub struct WeiszfeldReport {
    pub point: ParamVector,
    pub objectives: Vec<f64>,
    pub iterations: usize,
}

/// Smoothed Weiszfeld iteration for the weighted geometric median.
pub fn weiszfeld(
    models: &[ParamVector],
    weights: Option<&[f64]>,
    params: &WeiszfeldParams,
) -> Result<WeiszfeldReport> {
    check_models(models)?;
    let w = resolve_weights(models.len(), weights)?;
    Ok(weiszfeld_with_weights(models, &w, params))
}

fn weiszfeld_with_weights(
    models: &[ParamVector],
    w: &[f64],
    params: &WeiszfeldParams,
) -> WeiszfeldReport {
    let dim = models[0].len();
    let mut z = weighted_mean(models, w).into_inner();
    let mut obj = objective_unchecked(&z, models, w);
    let mut objectives = vec![obj];

    if let Some(j) = optimal_data_point(models, w) {
        let at_point = objective_unchecked(models[j].as_slice(), models, w);
        if at_point <= obj {
            objectives.push(at_point);
            return WeiszfeldReport {
                point: models[j].clone(),
                objectives,
                iterations: 0,
            };
        }
    }
    let mut next = vec![0.0; dim];
    let mut iterations = 0;

    for _ in 0..params.max_iters {
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut beta_total = 0.0;
        for (m, &wn) in models.iter().zip(w) {
            let beta = wn / euclid(&z, m.as_slice()).max(params.smoothing);
            beta_total += beta;
            for (acc, x) in next.iter_mut().zip(m.iter()) {
                *acc += beta * x;
            }
        }
        next.iter_mut().for_each(|v| *v /= beta_total);

        let next_obj = objective_unchecked(&next, models, w);
        // The smoothing floor can make a step near a data point slightly
        // uphill; such a step is rejected and the current iterate kept.
        if next_obj > obj {
            break;
        }
        let step = euclid(&next, &z);
        std::mem::swap(&mut z, &mut next);
        obj = next_obj;
        objectives.push(obj);
        iterations += 1;
        if step < params.tol {
            break;
        }
    }

    WeiszfeldReport {
        point: ParamVector::new(z),
        objectives,
        iterations,
    }
}

/// Finds a data point that is the unique geometric median: `x_j` is optimal
/// iff the unit pull of the other points, `‖Σ_{x_n ≠ x_j} w_n u_n‖`, does not
/// exceed the total weight sitting at `x_j`. Weiszfeld converges only
/// sublinearly towards such points.
fn optimal_data_point(models: &[ParamVector], w: &[f64]) -> Option<usize> {
    let dim = models[0].len();
    let mut pull = vec![0.0; dim];
    for (j, xj) in models.iter().enumerate() {
        if models[..j].iter().any(|m| m == xj) {
            continue;
        }
        pull.iter_mut().for_each(|v| *v = 0.0);
        let mut own = 0.0;
        for (m, &wn) in models.iter().zip(w) {
            let d = euclid(m.as_slice(), xj.as_slice());
            if d == 0.0 {
                own += wn;
            } else {
                for ((acc, a), b) in pull.iter_mut().zip(m.iter()).zip(xj.iter()) {
                    *acc += wn * (a - b) / d;
                }
            }
        }
        // Strict, so that ties (a whole segment of medians) are left to the
        // iteration rather than resolved by input order.
        if pull.iter().map(|v| v * v).sum::<f64>().sqrt() < own * (1.0 - 1e-9) {
            return Some(j);
        }
    }
    None
}

//! Heterogeneous synthetic classification tasks.
//!
//! For each party `n`:
//!
//! ```text
//! u_n ~ N(0, ζ)          W_n[c, j] ~ N(u_n, 1)     b_n[c] ~ N(u_n, 1)
//! B_n ~ N(0, β)          v_n[j]    ~ N(B_n, 1)
//! x   ~ N(v_n, Σ)        Σ = diag(j^(-1.2)), j = 1..=features
//! y   = argmax(W_n x + b_n)
//! ```
//!
//! The second argument of `N(·, ·)` is a variance. Per-party sample counts
//! follow a truncated discrete power law. Party `n` draws from its own
//! stream, so parties can be regenerated independently.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{FedError, Result};
use crate::model::{argmax, Batch, LogisticShape};
use crate::param::ParamVector;
use crate::rng::{domain, stream};

/// Truncated discrete power law `P(k) ∝ k^(-exponent)` on `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountLaw {
    pub exponent: f64,
    pub min_count: usize,
    pub max_count: usize,
}

impl Default for CountLaw {
    fn default() -> Self {
        CountLaw {
            exponent: 1.5,
            min_count: 64,
            max_count: 1024,
        }
    }
}

impl CountLaw {
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent.is_finite() && self.exponent >= 0.0) {
            return Err(FedError::config(
                "count law exponent must be finite and >= 0",
            ));
        }
        if self.min_count == 0 || self.min_count > self.max_count {
            return Err(FedError::config(
                "count law needs 1 <= min_count <= max_count",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    /// Variance of the per-party model shift `u_n`.
    pub zeta: f64,
    /// Variance of the per-party feature shift `B_n`.
    pub beta: f64,
    pub parties: usize,
    #[serde(default = "default_features")]
    pub features: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    /// `Σ_jj = j^(-sigma_exponent)`.
    #[serde(default = "default_sigma_exponent")]
    pub sigma_exponent: f64,
    #[serde(default)]
    pub count_law: CountLaw,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    pub seed: u64,
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

impl SynthSpec {
    pub fn new(zeta: f64, beta: f64, parties: usize, seed: u64) -> Self {
        SynthSpec {
            zeta,
            beta,
            parties,
            features: default_features(),
            classes: default_classes(),
            sigma_exponent: default_sigma_exponent(),
            count_law: CountLaw::default(),
            train_fraction: default_train_fraction(),
            seed,
        }
    }

    pub fn shape(&self) -> LogisticShape {
        LogisticShape::new(self.features, self.classes)
    }

    /// Diagonal of the feature covariance; strictly decreasing.
    pub fn sigma_diag(&self) -> Vec<f64> {
        (1..=self.features)
            .map(|j| (j as f64).powf(-self.sigma_exponent))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta.is_finite() && self.zeta >= 0.0)
            || !(self.beta.is_finite() && self.beta >= 0.0)
        {
            return Err(FedError::config("zeta and beta must be finite and >= 0"));
        }
        if self.parties == 0 || self.features == 0 || self.classes < 2 {
            return Err(FedError::config(
                "synthetic data needs parties >= 1, features >= 1 and classes >= 2",
            ));
        }
        if !(self.sigma_exponent > 0.0 && self.sigma_exponent.is_finite()) {
            return Err(FedError::config("sigma_exponent must be positive"));
        }
        self.count_law.validate()?;
        if self.count_law.min_count < self.classes {
            return Err(FedError::config(format!(
                "min_count {} is below the number of classes {}",
                self.count_law.min_count, self.classes
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(FedError::config("train_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// One party's ground truth and samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub party_index: usize,
    pub shape: LogisticShape,
    /// Class-major `classes × features`.
    pub truth_w: Vec<f64>,
    pub truth_b: Vec<f64>,
    /// `u_n`.
    pub model_shift: f64,
    /// `B_n`.
    pub data_shift: f64,
    /// `v_n`.
    pub feature_mean: Vec<f64>,
    pub train: Batch,
    pub test: Batch,
}

impl SyntheticTask {
    pub fn truth_params(&self) -> ParamVector {
        self.shape
            .pack(&self.truth_w, &self.truth_b)
            .expect("ground truth matches its shape")
    }

    /// Label the ground-truth model assigns to `x`.
    pub fn truth_label(&self, x: &[f64]) -> usize {
        let f = self.shape.features;
        let logits: Vec<f64> = (0..self.shape.classes)
            .map(|c| {
                self.truth_w[c * f..(c + 1) * f]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + self.truth_b[c]
            })
            .collect();
        argmax(&logits)
    }
}

/// Draws `n` sample counts from the truncated power law by inverting its CDF.
pub fn sample_counts(law: &CountLaw, n: usize, seed: u64) -> Result<Vec<usize>> {
    law.validate()?;
    let mut cdf: Vec<f64> = (law.min_count..=law.max_count)
        .map(|k| (k as f64).powf(-law.exponent))
        .collect();
    let mut acc = 0.0;
    for p in cdf.iter_mut() {
        acc += *p;
        *p = acc;
    }
    let mut rng = stream(seed, &[domain::SAMPLE_COUNTS]);
    Ok((0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            law.min_count + k
        })
        .collect())
}

/// Generates one task per party. Deterministic in `spec`.
pub fn generate(spec: &SynthSpec) -> Result<Vec<SyntheticTask>> {
    spec.validate()?;
    let counts = sample_counts(&spec.count_law, spec.parties, spec.seed)?;
    let sigma_sd: Vec<f64> = spec.sigma_diag().iter().map(|v| v.sqrt()).collect();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let (f, k) = (spec.features, spec.classes);

    counts
        .iter()
        .enumerate()
        .map(|(n, &count)| {
            let mut rng = stream(spec.seed, &[domain::PARTY_TRUTH, n as u64]);
            let model_shift = spec.zeta.sqrt() * std_normal.sample(&mut rng);
            let truth_w: Vec<f64> = (0..k * f)
                .map(|_| model_shift + std_normal.sample(&mut rng))
                .collect();
            let truth_b: Vec<f64> = (0..k)
                .map(|_| model_shift + std_normal.sample(&mut rng))
                .collect();
            let data_shift = spec.beta.sqrt() * std_normal.sample(&mut rng);
            let feature_mean: Vec<f64> = (0..f)
                .map(|_| data_shift + std_normal.sample(&mut rng))
                .collect();

            let mut task = SyntheticTask {
                party_index: n,
                shape: spec.shape(),
                truth_w,
                truth_b,
                model_shift,
                data_shift,
                feature_mean,
                // placeholders, filled below
                train: Batch {
                    features: f,
                    x: vec![],
                    labels: vec![],
                },
                test: Batch {
                    features: f,
                    x: vec![],
                    labels: vec![],
                },
            };

            let mut xs = Vec::with_capacity(count * f);
            let mut labels = Vec::with_capacity(count);
            for _ in 0..count {
                let start = xs.len();
                xs.extend(
                    task.feature_mean
                        .iter()
                        .zip(&sigma_sd)
                        .map(|(m, s)| m + s * std_normal.sample(&mut rng)),
                );
                labels.push(task.truth_label(&xs[start..]));
            }

            let n_train = ((count as f64) * spec.train_fraction).round() as usize;
            let n_train = n_train.clamp(1, count - 1);
            let test_x = xs.split_off(n_train * f);
            let test_labels = labels.split_off(n_train);
            task.train = Batch::new(f, xs, labels)?;
            task.test = Batch::new(f, test_x, test_labels)?;
            Ok(task)
        })
        .collect()
}

/// Centers for the quadratic diagnostic, entries uniform on `[-spread, spread]`.
pub fn quadratic_centers(
    parties: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<Vec<ParamVector>> {
    if parties == 0 || dim == 0 {
        return Err(FedError::config(
            "quadratic centers need parties >= 1 and dim >= 1",
        ));
    }
    if !(spread.is_finite() && spread >= 0.0) {
        return Err(FedError::config("spread must be finite and >= 0"));
    }
    Ok((0..parties)
        .map(|n| {
            let mut rng = stream(seed, &[domain::QUADRATIC_CENTERS, n as u64]);
            ParamVector::new(
                (0..dim)
                    .map(|_| rng.random_range(-spread..=spread))
                    .collect(),
            )
        })
        .collect())
}

/// Writes every sample as CSV: `party,split,label,x0,…,x{features-1}`.
pub fn write_tasks_csv<W: Write>(tasks: &[SyntheticTask], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let features = tasks.first().map_or(0, |t| t.shape.features);
    let mut header = vec!["party".to_string(), "split".into(), "label".into()];
    header.extend((0..features).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for t in tasks {
        for (split, batch) in [("train", &t.train), ("test", &t.test)] {
            for i in 0..batch.len() {
                let mut rec = vec![
                    t.party_index.to_string(),
                    split.to_string(),
                    batch.labels[i].to_string(),
                ];
                rec.extend(batch.row(i).iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

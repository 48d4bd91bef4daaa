//! Differentiable workloads: multinomial logistic regression and the
//! diagnostic quadratic `½‖x − c‖²`.
//!
//! Logistic parameters are packed as the class-major rows of `W`
//! (`classes × features`) followed by the `classes` biases.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, FedError, Result};
use crate::param::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogisticShape {
    pub features: usize,
    pub classes: usize,
}

impl LogisticShape {
    pub fn new(features: usize, classes: usize) -> Self {
        LogisticShape { features, classes }
    }

    /// Number of packed parameters.
    pub fn dim(&self) -> usize {
        self.classes * self.features + self.classes
    }

    /// Packs `w` (class-major, `classes × features`) and `b`.
    pub fn pack(&self, w: &[f64], b: &[f64]) -> Result<ParamVector> {
        check_len(self.classes * self.features, w.len())?;
        check_len(self.classes, b.len())?;
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(w);
        v.extend_from_slice(b);
        Ok(ParamVector::new(v))
    }

    fn weights<'a>(&self, params: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        params.split_at(self.classes * self.features)
    }

    fn check(&self, params: &ParamVector, batch: &Batch) -> Result<()> {
        check_len(self.dim(), params.len())?;
        check_len(self.features, batch.features)?;
        if let Some(&bad) = batch.labels.iter().find(|&&y| y >= self.classes) {
            return Err(FedError::Data(format!(
                "label {bad} out of range for {} classes",
                self.classes
            )));
        }
        Ok(())
    }

    /// Writes `W x + b` into `out`.
    fn logits(&self, params: &[f64], x: &[f64], out: &mut [f64]) {
        let (w, b) = self.weights(params);
        for (c, o) in out.iter_mut().enumerate() {
            let row = &w[c * self.features..(c + 1) * self.features];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[c];
        }
    }
}

/// Labelled samples stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub features: usize,
    pub x: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(features: usize, x: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(FedError::Data("batch must not be empty".into()));
        }
        check_len(features * labels.len(), x.len())?;
        Ok(Batch {
            features,
            x,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let features = rows.first().map_or(0, Vec::len);
        check_len(rows.len(), labels.len())?;
        let mut x = Vec::with_capacity(features * rows.len());
        for r in rows {
            check_len(features, r.len())?;
            x.extend_from_slice(r);
        }
        Batch::new(features, x, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.features..(i + 1) * self.features]
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

// −log softmax(logits)[label], with max-subtraction.
fn sample_nll(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Mean cross-entropy over the batch.
pub fn loss(shape: &LogisticShape, params: &ParamVector, batch: &Batch) -> Result<f64> {
    shape.check(params, batch)?;
    let mut logits = vec![0.0; shape.classes];
    let total: f64 = (0..batch.len())
        .map(|i| {
            shape.logits(params.as_slice(), batch.row(i), &mut logits);
            sample_nll(&logits, batch.labels[i])
        })
        .sum();
    Ok(total / batch.len() as f64)
}

/// Gradient of [`loss`], in parameter packing order.
pub fn grad(shape: &LogisticShape, params: &ParamVector, batch: &Batch) -> Result<ParamVector> {
    shape.check(params, batch)?;
    let all: Vec<usize> = (0..batch.len()).collect();
    Ok(grad_rows(shape, params, batch, &all))
}

/// Mean cross-entropy gradient over the rows `indices` (repeats allowed).
/// Shapes and labels must already be validated.
pub(crate) fn grad_rows(
    shape: &LogisticShape,
    params: &ParamVector,
    batch: &Batch,
    indices: &[usize],
) -> ParamVector {
    let f = shape.features;
    let mut g = vec![0.0; shape.dim()];
    let mut probs = vec![0.0; shape.classes];
    for &i in indices {
        let x = batch.row(i);
        shape.logits(params.as_slice(), x, &mut probs);
        let max = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for p in probs.iter_mut() {
            *p = (*p - max).exp();
            z += *p;
        }
        probs[batch.labels[i]] -= z;
        let (gw, gb) = g.split_at_mut(shape.classes * f);
        for (c, p) in probs.iter().enumerate() {
            // softmax_c − 1[c = y]
            let delta = p / z;
            for (acc, xj) in gw[c * f..(c + 1) * f].iter_mut().zip(x) {
                *acc += delta * xj;
            }
            gb[c] += delta;
        }
    }
    let inv = 1.0 / indices.len() as f64;
    g.iter_mut().for_each(|v| *v *= inv);
    ParamVector::new(g)
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn accuracy(shape: &LogisticShape, params: &ParamVector, batch: &Batch) -> Result<f64> {
    shape.check(params, batch)?;
    let mut logits = vec![0.0; shape.classes];
    let hits = (0..batch.len())
        .filter(|&i| {
            shape.logits(params.as_slice(), batch.row(i), &mut logits);
            argmax(&logits) == batch.labels[i]
        })
        .count();
    Ok(hits as f64 / batch.len() as f64)
}

/// `½‖x − c‖²`.
pub fn quadratic_loss(center: &ParamVector, x: &ParamVector) -> Result<f64> {
    check_len(center.len(), x.len())?;
    Ok(0.5
        * x.iter()
            .zip(center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>())
}

/// `x − c`.
pub fn quadratic_grad(center: &ParamVector, x: &ParamVector) -> Result<ParamVector> {
    x.sub(center)
}

//! Dense parameter vectors and the proximal distance `B(x, c) = ½‖x − c‖²_Q`.

use serde::{Deserialize, Serialize};
use std::ops::Index;

use crate::error::{check_len, FedError, Result};

/// A flat model parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Euclidean distance to `other`.
    pub fn l2_distance(&self, other: &ParamVector) -> Result<f64> {
        check_len(self.len(), other.len())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        axpy(-1.0, other, self)
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        axpy(1.0, other, self)
    }

    pub fn scale(&self, a: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|v| a * v).collect())
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        ParamVector(values)
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<'a> IntoIterator for &'a ParamVector {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Returns `a·x + y`.
pub fn axpy(a: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
    check_len(y.len(), x.len())?;
    Ok(ParamVector(
        x.0.iter().zip(&y.0).map(|(xi, yi)| a * xi + yi).collect(),
    ))
}

/// The proximal distance `B`. Only diagonal scalings are supported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistanceSpec {
    #[default]
    SquaredL2,
    /// `½ Σ_d q_d (x_d − c_d)²` with every `q_d > 0`.
    ScaledQ { q_diag: Vec<f64> },
}

impl DistanceSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            DistanceSpec::SquaredL2 => Ok(()),
            DistanceSpec::ScaledQ { q_diag } => {
                if q_diag.len() != dim {
                    return Err(FedError::config(format!(
                        "q_diag has {} entries but the model has {dim} parameters",
                        q_diag.len()
                    )));
                }
                if let Some(bad) = q_diag.iter().find(|q| !(q.is_finite() && **q > 0.0)) {
                    return Err(FedError::config(format!(
                        "q_diag entries must be positive and finite, found {bad}"
                    )));
                }
                Ok(())
            }
        }
    }

    fn weight(&self, d: usize) -> f64 {
        match self {
            DistanceSpec::SquaredL2 => 1.0,
            DistanceSpec::ScaledQ { q_diag } => q_diag[d],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistanceSpec::SquaredL2 => "squared-l2",
            DistanceSpec::ScaledQ { .. } => "scaled-q",
        }
    }
}

/// `½ Σ_d q_d (x_d − c_d)²`.
pub fn distance(spec: &DistanceSpec, x: &ParamVector, c: &ParamVector) -> Result<f64> {
    check_len(x.len(), c.len())?;
    spec.validate(x.len())?;
    let sum: f64 =
        x.0.iter()
            .zip(&c.0)
            .enumerate()
            .map(|(d, (xd, cd))| {
                let diff = xd - cd;
                spec.weight(d) * (diff * diff)
            })
            .sum();
    Ok(0.5 * sum)
}

/// Gradient of [`distance`] in its first argument: `q ⊙ (x − c)`.
pub fn distance_grad(spec: &DistanceSpec, x: &ParamVector, c: &ParamVector) -> Result<ParamVector> {
    check_len(x.len(), c.len())?;
    spec.validate(x.len())?;
    Ok(ParamVector(
        x.0.iter()
            .zip(&c.0)
            .enumerate()
            .map(|(d, (xd, cd))| spec.weight(d) * (xd - cd))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec())
    }

    #[test]
    fn axpy_examples() {
        assert_eq!(
            axpy(0.0, &pv(&[1., 2.]), &pv(&[3., 4.])).unwrap(),
            pv(&[3., 4.])
        );
        assert_eq!(
            axpy(1.0, &pv(&[1., 2.]), &pv(&[3., 4.])).unwrap(),
            pv(&[4., 6.])
        );
        assert_eq!(
            axpy(-2.0, &pv(&[1., 0.]), &pv(&[0., 1.])).unwrap(),
            pv(&[-2., 1.])
        );
    }

    #[test]
    fn axpy_rejects_mismatched_lengths() {
        let err = axpy(1.0, &pv(&[1.]), &pv(&[1., 2.])).unwrap_err();
        assert_eq!(
            err,
            FedError::Dimension {
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn distance_examples() {
        let l2 = DistanceSpec::SquaredL2;
        assert_eq!(
            distance(&l2, &pv(&[1., -2.]), &pv(&[1., -2.])).unwrap(),
            0.0
        );
        assert_eq!(distance(&l2, &pv(&[3., 0.]), &pv(&[0., 4.])).unwrap(), 12.5);
        let q = DistanceSpec::ScaledQ {
            q_diag: vec![2., 1.],
        };
        assert_eq!(distance(&q, &pv(&[1., 1.]), &pv(&[0., 0.])).unwrap(), 1.5);
    }

    #[test]
    fn distance_grad_examples() {
        let l2 = DistanceSpec::SquaredL2;
        assert_eq!(
            distance_grad(&l2, &pv(&[5., 5.]), &pv(&[5., 5.])).unwrap(),
            pv(&[0., 0.])
        );
        assert_eq!(
            distance_grad(&l2, &pv(&[3., 0.]), &pv(&[0., 4.])).unwrap(),
            pv(&[3., -4.])
        );
    }

    #[test]
    fn invalid_q_is_a_config_error() {
        let zero = DistanceSpec::ScaledQ {
            q_diag: vec![1., 0.],
        };
        assert!(matches!(
            distance(&zero, &pv(&[1., 1.]), &pv(&[0., 0.])),
            Err(FedError::Config(_))
        ));
        let short = DistanceSpec::ScaledQ { q_diag: vec![1.] };
        assert!(matches!(
            distance_grad(&short, &pv(&[1., 1.]), &pv(&[0., 0.])),
            Err(FedError::Config(_))
        ));
    }

    fn triple(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(-10.0..10.0f64, dim),
            prop::collection::vec(-10.0..10.0f64, dim),
            prop::collection::vec(0.1..5.0f64, dim),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn distance_is_nonnegative_and_zero_only_at_center((x, c, q) in triple(5)) {
            let spec = DistanceSpec::ScaledQ { q_diag: q };
            let d = distance(&spec, &pv(&x), &pv(&c)).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d == 0.0, x == c);
            prop_assert_eq!(distance(&spec, &pv(&x), &pv(&x)).unwrap(), 0.0);
        }

        #[test]
        fn gradient_matches_central_differences((x, c, q) in triple(4)) {
            let spec = DistanceSpec::ScaledQ { q_diag: q };
            let (x, c) = (pv(&x), pv(&c));
            let g = distance_grad(&spec, &x, &c).unwrap();
            let h = 1e-5;
            for d in 0..x.len() {
                let mut plus = x.clone().into_inner();
                let mut minus = x.clone().into_inner();
                plus[d] += h;
                minus[d] -= h;
                let fd = (distance(&spec, &pv(&plus), &c).unwrap()
                    - distance(&spec, &pv(&minus), &c).unwrap()) / (2.0 * h);
                let scale = g[d].abs().max(1.0);
                prop_assert!((fd - g[d]).abs() / scale < 1e-5, "d={d} fd={fd} g={}", g[d]);
            }
        }

        #[test]
        fn unit_q_is_bitwise_squared_l2((x, c, _q) in triple(6)) {
            let unit = DistanceSpec::ScaledQ { q_diag: vec![1.0; 6] };
            let (x, c) = (pv(&x), pv(&c));
            let a = distance(&DistanceSpec::SquaredL2, &x, &c).unwrap();
            let b = distance(&unit, &x, &c).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
            let ga = distance_grad(&DistanceSpec::SquaredL2, &x, &c).unwrap();
            let gb = distance_grad(&unit, &x, &c).unwrap();
            for (u, v) in ga.iter().zip(gb.iter()) {
                prop_assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }
}

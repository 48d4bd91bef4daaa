//! Distributional checks on the synthetic generator.

use fedplus_core::synth::{generate, sample_counts};
use fedplus_core::*;

fn sample_std(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[test]
fn model_shift_spread_follows_zeta() {
    let mut stds = Vec::new();
    for seed in 0..50 {
        let mut spec = SynthSpec::new(1000.0, 10.0, 30, seed);
        spec.count_law = CountLaw {
            exponent: 1.5,
            min_count: 10,
            max_count: 12,
        };
        let shifts: Vec<f64> = generate(&spec)
            .unwrap()
            .iter()
            .map(|t| t.model_shift)
            .collect();
        stds.push(sample_std(&shifts));
    }
    let avg = stds.iter().sum::<f64>() / stds.len() as f64;
    let target = 1000f64.sqrt();
    assert!((avg - target).abs() < 0.25 * target, "avg std {avg}");
}

#[test]
fn data_shift_spread_follows_beta() {
    let mut all = Vec::new();
    for seed in 0..50 {
        let mut spec = SynthSpec::new(0.0, 10.0, 30, seed);
        spec.count_law = CountLaw {
            exponent: 1.5,
            min_count: 10,
            max_count: 12,
        };
        all.extend(generate(&spec).unwrap().iter().map(|t| t.data_shift));
    }
    let s = sample_std(&all);
    assert!((s - 10f64.sqrt()).abs() < 0.1 * 10f64.sqrt(), "std {s}");
}

#[test]
fn counts_stay_in_range_and_are_heavy_tailed() {
    let law = CountLaw::default();
    let counts = sample_counts(&law, 30, 0).unwrap();
    assert!(counts.iter().all(|&c| (64..=1024).contains(&c)));
    let max = *counts.iter().max().unwrap() as f64;
    let min = *counts.iter().min().unwrap() as f64;
    assert!(max / min > 4.0, "{counts:?}");
}

#[test]
fn split_sizes_follow_train_fraction() {
    let mut spec = SynthSpec::new(1.0, 1.0, 10, 2);
    spec.count_law = CountLaw {
        exponent: 1.5,
        min_count: 20,
        max_count: 200,
    };
    for t in generate(&spec).unwrap() {
        let total = t.train.len() + t.test.len();
        assert_eq!(t.train.len(), ((total as f64) * 0.8).round() as usize);
    }
}

//! Round metrics, run summaries and their on-disk formats.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};

use crate::engine::{EvalTarget, FederationConfig, RoundRecord};
use crate::error::{check_len, FedError, Result};
use crate::param::ParamVector;

/// Mean, population standard deviation and maximum of `|after − before|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ChangeStats {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
}

/// Pools `|after − before|` over all models and coordinates.
pub fn aggregation_change(before: &[ParamVector], after: &[ParamVector]) -> Result<ChangeStats> {
    check_len(before.len(), after.len())?;
    let mut count = 0usize;
    let (mut sum, mut max) = (0.0, 0.0f64);
    for (b, a) in before.iter().zip(after) {
        check_len(b.len(), a.len())?;
        for (x, y) in b.iter().zip(a.iter()) {
            let d = (y - x).abs();
            sum += d;
            max = max.max(d);
            count += 1;
        }
    }
    if count == 0 {
        return Ok(ChangeStats::default());
    }
    let mean = sum / count as f64;
    let var = before
        .iter()
        .zip(after)
        .flat_map(|(b, a)| {
            b.iter()
                .zip(a.iter())
                .map(|(x, y)| ((y - x).abs() - mean).powi(2))
        })
        .sum::<f64>()
        / count as f64;
    Ok(ChangeStats {
        mean,
        std: var.sqrt(),
        max,
    })
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub round: usize,
    pub preset: String,
    pub party_count: usize,
    pub avg_test_acc: Option<f64>,
    pub avg_train_loss: f64,
    pub agg_change_mean: f64,
    pub agg_change_std: f64,
    pub agg_change_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub preset: String,
    pub eval_target: EvalTarget,
    /// Evaluated round numbers; every series below is aligned with it.
    pub rounds: Vec<usize>,
    pub final_avg_test_acc: Option<f64>,
    pub final_avg_train_loss: f64,
    pub avg_test_acc: Vec<f64>,
    pub avg_train_loss: Vec<f64>,
    pub agg_change_mean: Vec<f64>,
    pub agg_change_std: Vec<f64>,
    /// Hex SHA-256 of the canonical JSON encoding of the config.
    pub config_fingerprint: String,
    pub config: FederationConfig,
    /// Kept out of the serialized summary so artifacts stay reproducible.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

pub fn config_fingerprint(config: &FederationConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&canonical))
}

/// Per-round rows for the evaluated rounds.
pub fn round_rows(preset: &str, records: &[RoundRecord]) -> Vec<RoundRow> {
    records
        .iter()
        .filter_map(|r| {
            let evals = r.evaluation.as_ref()?;
            let n = evals.len() as f64;
            let acc: Option<f64> = evals
                .iter()
                .map(|e| e.test_accuracy)
                .sum::<Option<f64>>()
                .map(|s| s / n);
            Some(RoundRow {
                round: r.round,
                preset: preset.to_string(),
                party_count: r.active.len(),
                avg_test_acc: acc,
                avg_train_loss: evals.iter().map(|e| e.train_loss).sum::<f64>() / n,
                agg_change_mean: r.change.mean,
                agg_change_std: r.change.std,
                agg_change_max: r.change.max,
            })
        })
        .collect()
}

/// Summarizes a run. Accuracies are averaged uniformly over parties.
pub fn summarize(
    preset: &str,
    config: &FederationConfig,
    records: &[RoundRecord],
) -> Result<RunSummary> {
    if records.is_empty() {
        return Err(FedError::Data("no round records to summarize".into()));
    }
    let rows = round_rows(preset, records);
    let last = rows.last();
    Ok(RunSummary {
        preset: preset.to_string(),
        eval_target: config.eval_target(),
        rounds: rows.iter().map(|r| r.round).collect(),
        final_avg_test_acc: last.and_then(|r| r.avg_test_acc),
        final_avg_train_loss: last.map_or(f64::NAN, |r| r.avg_train_loss),
        avg_test_acc: rows.iter().filter_map(|r| r.avg_test_acc).collect(),
        avg_train_loss: rows.iter().map(|r| r.avg_train_loss).collect(),
        agg_change_mean: rows.iter().map(|r| r.agg_change_mean).collect(),
        agg_change_std: rows.iter().map(|r| r.agg_change_std).collect(),
        config_fingerprint: config_fingerprint(config),
        config: config.clone(),
        wall_clock_secs: 0.0,
    })
}

/// Writes rows as CSV. Floats use the shortest representation that parses
/// back to the same value.
pub fn write_rows_csv<W: Write>(rows: &[RoundRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "round",
            "preset",
            "party_count",
            "avg_test_acc",
            "avg_train_loss",
            "agg_change_mean",
            "agg_change_std",
            "agg_change_max",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<RoundRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(FedError::from))
        .collect()
}

pub fn write_summary_json<W: Write>(summary: &RunSummary, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n")?;
    Ok(())
}

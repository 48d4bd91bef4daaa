//! Executes resolved runs and writes their artifacts.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use fedplus_core::metrics::{round_rows, summarize, write_rows_csv, write_summary_json};
use fedplus_core::synth::{generate, write_tasks_csv};
use fedplus_core::{run_federation, FedError, PartyTask, Preset};

use crate::config::{Dataset, ExperimentFile, Overrides, ResolvedRun};
use crate::CliError;

pub const SNAPSHOT_NAME: &str = "resolved.toml";

/// Outcome of one finished run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub name: String,
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub final_avg_test_acc: Option<f64>,
    pub final_avg_train_loss: f64,
    pub wall_clock_secs: f64,
}

/// Resolves `file`, writes the snapshot, then executes every run on a pool
/// of `jobs` threads. All runs are attempted; the first failure in run
/// order is returned after the others finish.
pub fn run_experiment(
    file: &ExperimentFile,
    overrides: Overrides,
    out_dir: &Path,
    jobs: usize,
) -> Result<Vec<RunReport>, CliError> {
    if overrides.seed.is_some_and(|s| s > i64::MAX as u64) {
        return Err(CliError::Config(format!(
            "--seed must be at most {}",
            i64::MAX
        )));
    }
    let resolved = file.resolved(overrides);
    let tasks = resolved.tasks()?;
    let runs = resolved.runs(&tasks)?;
    let snapshot = resolved.to_toml()?;

    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(SNAPSHOT_NAME), snapshot)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let results: Vec<Result<RunReport, CliError>> = pool.install(|| {
        runs.par_iter()
            .map(|run| execute(run, &tasks, out_dir))
            .collect()
    });
    results.into_iter().collect()
}

fn execute(run: &ResolvedRun, tasks: &[PartyTask], out_dir: &Path) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let records = run_federation(&run.config, tasks).map_err(|e| match e {
        FedError::Numerical { round, party, step } => CliError::Numerical {
            run: run.name.clone(),
            round,
            party,
            step,
        },
        other => CliError::Run {
            run: run.name.clone(),
            message: other.to_string(),
        },
    })?;
    let run_err = |e: FedError| CliError::Run {
        run: run.name.clone(),
        message: e.to_string(),
    };
    let mut summary = summarize(&run.label, &run.config, &records).map_err(run_err)?;
    summary.wall_clock_secs = start.elapsed().as_secs_f64();

    let csv = out_dir.join(format!("{}.csv", run.name));
    let json = out_dir.join(format!("{}.summary.json", run.name));
    write_rows_csv(
        &round_rows(&run.label, &records),
        BufWriter::new(fs::File::create(&csv)?),
    )
    .map_err(run_err)?;
    write_summary_json(&summary, BufWriter::new(fs::File::create(&json)?)).map_err(run_err)?;
    Ok(RunReport {
        name: run.name.clone(),
        csv,
        summary: json,
        final_avg_test_acc: summary.final_avg_test_acc,
        final_avg_train_loss: summary.final_avg_train_loss,
        wall_clock_secs: summary.wall_clock_secs,
    })
}

/// Writes the dataset's samples (synthetic) or centers (quadratic) as CSV.
pub fn export_data(
    file: &ExperimentFile,
    seed: Option<u64>,
    out: &Path,
) -> Result<PathBuf, CliError> {
    let resolved = file.resolved(Overrides { seed, rounds: None });
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let writer = BufWriter::new(fs::File::create(out)?);
    let io = |e: FedError| CliError::Io(e.to_string());
    match resolved.dataset {
        Dataset::Synthetic { .. } => {
            let tasks = generate(&resolved.synth_spec()?)
                .map_err(|e| CliError::Config(format!("[dataset]: {e}")))?;
            write_tasks_csv(&tasks, writer).map_err(io)?;
        }
        Dataset::Quadratic { .. } => {
            use std::io::Write;
            let centers = resolved.centers()?;
            let mut w = writer;
            let dim = centers[0].len();
            let header: Vec<String> = std::iter::once("party".to_string())
                .chain((0..dim).map(|j| format!("c{j}")))
                .collect();
            writeln!(w, "{}", header.join(","))?;
            for (n, c) in centers.iter().enumerate() {
                let row: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{n},{}", row.join(","))?;
            }
            w.flush()?;
        }
    }
    Ok(out.to_path_buf())
}

/// Text printed by `list-presets`.
pub fn preset_listing() -> String {
    Preset::ALL.iter().map(|p| p.describe() + "\n").collect()
}

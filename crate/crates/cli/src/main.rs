use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fedplus_cli::config::{parse, ExperimentFile, Overrides};
use fedplus_cli::runner::{export_data, preset_listing, run_experiment};
use fedplus_cli::CliError;

#[derive(Parser)]
#[command(
    name = "fedplus",
    version,
    about = "Run Fed+ federated learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every [[run]] in an experiment file.
    Run {
        config: PathBuf,
        /// Overrides the dataset seed and the run seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the number of rounds of every run.
        #[arg(long)]
        rounds: Option<usize>,
        /// Output directory. Falls back to `out_dir` in the file, then
        /// FEDPLUS_OUT, then `results`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the presets and their parameter bindings.
    ListPresets,
    /// Write the dataset described by an experiment file as CSV.
    ExportData {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file. Defaults to `data.csv` in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<ExperimentFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn out_dir(flag: Option<PathBuf>, file: &ExperimentFile) -> PathBuf {
    flag.or_else(|| file.out_dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os("FEDPLUS_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fedplus: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::ListPresets => print!("{}", preset_listing()),
        Command::Run {
            config,
            seed,
            rounds,
            out,
            jobs,
        } => {
            let file = load(&config)?;
            let dir = out_dir(out, &file);
            let reports = run_experiment(&file, Overrides { seed, rounds }, &dir, jobs)?;
            for r in reports {
                let acc = r
                    .final_avg_test_acc
                    .map_or("-".to_string(), |a| format!("{a:.4}"));
                println!(
                    "{:<12} acc={acc} loss={:.6} -> {}",
                    r.name,
                    r.final_avg_train_loss,
                    r.csv.display()
                );
                eprintln!("{:<12} wall-clock {:.2}s", r.name, r.wall_clock_secs);
            }
        }
        Command::ExportData { config, seed, out } => {
            let file = load(&config)?;
            let path = out.unwrap_or_else(|| out_dir(None, &file).join("data.csv"));
            let written = export_data(&file, seed, &path)?;
            println!("{}", written.display());
        }
    }
    Ok(())
}

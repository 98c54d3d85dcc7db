//! `microsim`: synthesize a baseline population, run simulations, solve
//! standalone alignment problems, build reports and validate snapshots.

mod commands;
mod help;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "microsim",
    version,
    about = "Dynamic household microsimulation with household-size alignment"
)]
#[command(after_long_help = help::after_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reweight a reference sample to control totals and expand it into a
    /// linked baseline population.
    Synth(SynthArgs),
    /// Run the yearly simulation for one or more seeds.
    #[command(after_long_help = help::after_help())]
    Simulate(SimulateArgs),
    /// Solve a standalone household-size alignment problem.
    Align(AlignArgs),
    /// Compare run outputs with observed data and write report files.
    Report(ReportArgs),
    /// Check a population snapshot for integrity violations.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Reference sample CSV.
    #[arg(long)]
    pub sample: PathBuf,
    /// Directory of control-total CSVs.
    #[arg(long)]
    pub controls: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Largest acceptable category deviation.
    #[arg(long, default_value_t = 0.01)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Exit with code 3 when the fit does not converge or has warnings.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Seed to run; repeat for replicates. Defaults to the config's seeds.
    #[arg(long = "seed")]
    pub seeds: Vec<u64>,
    /// Replicates run at once; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory, overriding the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Top-bin semantics (paper or consistent), overriding the config.
    #[arg(long)]
    pub semantics: Option<String>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Problem CSV (kind, bin, count).
    #[arg(long)]
    pub problem: PathBuf,
    /// Seed; repeat to solve once per seed.
    #[arg(long = "seed", default_values_t = [1u64])]
    pub seeds: Vec<u64>,
    /// Top-bin semantics: paper or consistent.
    #[arg(long, default_value = "paper")]
    pub semantics: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories (run_<seed>) or simulation output directories
    /// holding them.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Observed data: a snapshot and/or <dimension>.csv tables.
    #[arg(long)]
    pub observed: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Year to compare; defaults to the latest year of every run.
    #[arg(long)]
    pub year: Option<i32>,
    /// Treat categories missing from a table as zero.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Snapshot directory (persons.csv, households.csv).
    pub snapshot: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Align(a) => commands::align(&a),
        Command::Report(a) => commands::report(&a),
        Command::Validate(a) => commands::validate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}

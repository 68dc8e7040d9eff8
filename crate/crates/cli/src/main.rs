//! `edemand`: command-line front end for the household delivery demand simulator.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "edemand",
    version,
    about = "Household e-commerce delivery demand simulation",
    long_about = "Household e-commerce delivery demand simulation.\n\n\
        Every flag may also be given in a JSON file passed with --config, using the long flag \
        name with underscores as the key (for example {\"seed\": 7, \"scenario\": [\"S1\"]}). \
        Flags override file values. Relative paths in the file resolve against its directory."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one or more scenarios over a population.
    Run(RunArgs),
    /// Evaluate scenarios side by side and report percentage changes.
    Compare(RunArgs),
    /// Fit free parameters so simulated monthly aggregates meet category targets.
    Calibrate(CalibrateArgs),
    /// Sequential maximum-likelihood estimation of all three choice levels.
    Fit(FitArgs),
    /// Generate adopters, orders, and packages per item category.
    Synthesize(SynthesizeArgs),
    /// Write the built-in synthetic population (CSV, or its spec as JSON with --spec).
    GenPopulation(GenPopulationArgs),
    /// Write the built-in parameter set as JSON.
    GenParams(GenArgs),
    /// Write the built-in scenarios S1 to S4 as a JSON array.
    GenScenarios(GenArgs),
    /// Write the built-in calibration targets as JSON.
    GenTargets(GenArgs),
    /// Write the built-in item category settings as JSON.
    GenCategories(GenArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// JSON file with default values for any flag of this command.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Parameter JSON; listed fields replace the built-in values. [default: built-in set]
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Worker threads; does not change any output. [default: available CPUs]
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Output directory. [default: $EDEMAND_OUT, else ./edemand-out]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct InputArgs {
    /// Household CSV (household_id,size) or synthetic population spec JSON.
    /// [default: built-in synthetic population of 933 households]
    #[arg(long, value_name = "FILE")]
    pub population: Option<PathBuf>,
    /// Built-in scenario name (S1..S4, estimation) or scenario JSON file; repeatable.
    /// [default: S1, or S1 S2 S3 S4 for compare]
    #[arg(long, value_name = "NAME|FILE")]
    pub scenario: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Exact enumeration of the joint choice distribution.
    Expectation,
    /// Monte Carlo weeks per household; needs --seed.
    Sample,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    /// Evaluation mode. [default: expectation]
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Master seed (64-bit); required in sample mode.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sampled weeks per household in sample mode. [default: 52]
    #[arg(long, value_name = "N")]
    pub replications: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    /// Calibration targets JSON. [default: built-in targets]
    #[arg(long, value_name = "FILE")]
    pub targets: Option<PathBuf>,
    /// Item category to calibrate. [default: other-packages]
    #[arg(long, value_name = "NAME")]
    pub category: Option<String>,
    /// Item category settings JSON. [default: built-in settings]
    #[arg(long, value_name = "FILE")]
    pub categories: Option<PathBuf>,
    /// Free parameters with bounds, JSON list of {parameter, lower, upper}.
    /// [default: alpha in [1, 60]]
    #[arg(long, value_name = "FILE")]
    pub free: Option<PathBuf>,
    /// Starting value of alpha. [default: value from --params]
    #[arg(long, value_name = "X")]
    pub start_alpha: Option<f64>,
    /// Relative residual below which a target counts as met. [default: from targets, 0.05]
    #[arg(long, value_name = "X")]
    pub tolerance: Option<f64>,
    /// Simplex iteration limit. [default: 500]
    #[arg(long, value_name = "N")]
    pub max_iterations: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scenario whose option set generates order value and total value choices.
    /// [default: estimation]
    #[arg(long, value_name = "NAME|FILE")]
    pub scenario: Option<String>,
    /// Simulate the three data sets from --params instead of reading them.
    #[arg(long)]
    pub simulate: bool,
    /// Simulated choices per level. [default: 20000]
    #[arg(long, value_name = "N")]
    pub observations: Option<usize>,
    /// Seed for simulated data. [default: 2019]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Delivery option choices CSV (obs_id,alt_id,chosen,covariates...).
    #[arg(long, value_name = "FILE")]
    pub level1: Option<PathBuf>,
    /// Order value choices CSV with columns total_value, order_value.
    #[arg(long, value_name = "FILE")]
    pub level2: Option<PathBuf>,
    /// Total value choices CSV with columns total_value, household_size.
    #[arg(long, value_name = "FILE")]
    pub level3: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    /// Item category settings JSON. [default: built-in settings]
    #[arg(long, value_name = "FILE")]
    pub categories: Option<PathBuf>,
    /// Simulated weeks. [default: 4]
    #[arg(long, value_name = "N")]
    pub weeks: Option<u32>,
    /// Master seed (64-bit); required.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    /// Destination file. [default: standard output]
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct GenPopulationArgs {
    #[command(flatten)]
    pub gen: GenArgs,
    /// Write the synthetic population spec as JSON instead of the household CSV.
    #[arg(long)]
    pub spec: bool,
}

/// Failure with its process exit status: 2 for invalid input, 1 otherwise.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    /// Standard output was closed early, as with `| head`.
    pub broken_pipe: bool,
}

impl Failure {
    pub fn invalid(field: &str, message: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: format!("configuration error in `{field}`: {message}"),
            broken_pipe: false,
        }
    }
}

impl From<edemand::Error> for Failure {
    fn from(e: edemand::Error) -> Self {
        use edemand::Error as E;
        let code = match &e {
            E::Unidentifiable { .. } => 1,
            E::Io(io) if io.kind() != std::io::ErrorKind::NotFound => 1,
            _ => 2,
        };
        let broken_pipe = match &e {
            E::Io(io) => io.kind() == std::io::ErrorKind::BrokenPipe,
            E::Csv(c) => {
                matches!(c.kind(), csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe)
            }
            _ => false,
        };
        Self {
            code,
            message: e.to_string(),
            broken_pipe,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 1,
            broken_pipe: e.kind() == std::io::ErrorKind::BrokenPipe,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(a, false),
        Command::Compare(a) => commands::run(a, true),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Synthesize(a) => commands::synthesize(a),
        Command::GenPopulation(a) => commands::gen_population(a),
        Command::GenParams(a) => commands::gen_params(a),
        Command::GenScenarios(a) => commands::gen_scenarios(a),
        Command::GenTargets(a) => commands::gen_targets(a),
        Command::GenCategories(a) => commands::gen_categories(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) if f.broken_pipe => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

//! `esn-lrofr`: generate data, harvest reservoir states, analyze and fit
//! readouts, and evaluate them on the Mackey-Glass benchmark.

mod commands;
mod data;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "esn-lrofr", version, about, args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every random stream the command uses.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for all outputs [default: .]
    #[arg(long = "out_dir", visible_alias = "out-dir", global = true)]
    pub out_dir: Option<PathBuf>,
    /// Progress messages on stderr (repeat for more).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    /// Timestamp stored in archives and manifests [default: now, RFC 3339]
    #[arg(long, global = true)]
    pub created: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a sequence file (Mackey-Glass or the multi-output surrogate).
    Generate(GenerateArgs),
    /// Drive a reservoir with a sequence file and store the states.
    Harvest(HarvestArgs),
    /// Forward-selection analysis of a harvest (trace and λ CSVs).
    Analyze(AnalyzeArgs),
    /// Fit a readout to a harvest and store the model.
    Fit(FitArgs),
    /// Free-run NRMSE evaluation of a model on fresh Mackey-Glass data.
    Evaluate(EvaluateArgs),
    /// Print a summary of an archive.
    Inspect(InspectArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    #[default]
    Mg,
    Surrogate,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Mg,
    VectorField,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Ofr,
    Lrofr,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutKind {
    #[default]
    Linear,
    LrofrLinear,
    RbfDopt,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
pub enum KernelKind {
    Gaussian,
    ThinPlateSpline,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Segmented,
    Independent,
}

#[derive(Args, Debug, Clone, Default)]
pub struct MgFlags {
    #[arg(long, help_heading = "Mackey-Glass")]
    pub alpha: Option<f64>,
    #[arg(long = "beta_exp", visible_alias = "beta-exp", help_heading = "Mackey-Glass")]
    pub beta_exp: Option<f64>,
    #[arg(long, help_heading = "Mackey-Glass")]
    pub gamma: Option<f64>,
    #[arg(long, help_heading = "Mackey-Glass")]
    pub tau: Option<f64>,
    #[arg(long, help_heading = "Mackey-Glass")]
    pub step: Option<f64>,
    #[arg(long, help_heading = "Mackey-Glass")]
    pub subsample: Option<usize>,
    #[arg(long = "burn_in", visible_alias = "burn-in", help_heading = "Mackey-Glass")]
    pub burn_in: Option<usize>,
    #[arg(long, help_heading = "Mackey-Glass")]
    pub length: Option<usize>,
    #[arg(long = "history_init", visible_alias = "history-init", help_heading = "Mackey-Glass")]
    pub history_init: Option<f64>,
    #[arg(long = "history_jitter", visible_alias = "history-jitter", help_heading = "Mackey-Glass")]
    pub history_jitter: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct EsnFlags {
    #[arg(long = "reservoir_size", visible_alias = "reservoir-size", help_heading = "Reservoir")]
    pub reservoir_size: Option<usize>,
    #[arg(long, help_heading = "Reservoir")]
    pub washout: Option<usize>,
    #[arg(long = "state_noise_amplitude", visible_alias = "state-noise-amplitude", help_heading = "Reservoir")]
    pub state_noise_amplitude: Option<f64>,
    #[arg(long = "include_input_in_readout", visible_alias = "include-input-in-readout", help_heading = "Reservoir")]
    pub include_input_in_readout: Option<bool>,
    #[arg(long = "target_spectral_radius", visible_alias = "target-spectral-radius", help_heading = "Reservoir")]
    pub target_spectral_radius: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct LrofrFlags {
    #[arg(long = "initial_lambda", visible_alias = "initial-lambda", help_heading = "Selection")]
    pub initial_lambda: Option<f64>,
    #[arg(long = "max_outer_iters", visible_alias = "max-outer-iters", help_heading = "Selection")]
    pub max_outer_iters: Option<usize>,
    #[arg(long = "lambda_rel_tol", visible_alias = "lambda-rel-tol", help_heading = "Selection")]
    pub lambda_rel_tol: Option<f64>,
    /// Stop a pass once the unexplained ratio drops below this.
    #[arg(long, help_heading = "Selection")]
    pub tolerance: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RbfFlags {
    #[arg(long, value_enum, help_heading = "RBF")]
    pub kernel: Option<KernelKind>,
    /// Gaussian width υ.
    #[arg(long, help_heading = "RBF")]
    pub variance: Option<f64>,
    #[arg(long = "dopt_beta", visible_alias = "dopt-beta", help_heading = "RBF")]
    pub dopt_beta: Option<f64>,
    /// Use every `stride`-th training state as a candidate centre.
    #[arg(long, help_heading = "RBF")]
    pub stride: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ProtocolFlags {
    #[arg(long = "n_trials", visible_alias = "n-trials", help_heading = "Protocol")]
    pub n_trials: Option<usize>,
    #[arg(long = "warm_steps", visible_alias = "warm-steps", help_heading = "Protocol")]
    pub warm_steps: Option<usize>,
    #[arg(long, value_delimiter = ',', help_heading = "Protocol")]
    pub horizons: Option<Vec<usize>>,
    #[arg(long, value_enum, help_heading = "Protocol")]
    pub mode: Option<ModeKind>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub subject: Option<Subject>,
    /// TOML settings; keys as in the manifest's `resolved` table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Apply `y → tanh(y − 1)` to Mackey-Glass output.
    #[arg(long)]
    pub transform: Option<bool>,
    #[arg(long = "n_points", visible_alias = "n-points")]
    pub n_points: Option<usize>,
    /// Std. deviation of the surrogate's response noise.
    #[arg(long)]
    pub noise: Option<f64>,
    #[command(flatten)]
    pub mg: MgFlags,
    #[arg(short, long, default_value = "data.csv")]
    pub output: String,
}

#[derive(Args, Debug)]
pub struct HarvestArgs {
    /// Sequence file from `generate`.
    #[arg(long)]
    pub data: PathBuf,
    /// Reservoir config (TOML, field names as in the config type).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in config used when no file is given.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[command(flatten)]
    pub esn: EsnFlags,
    #[arg(short, long, default_value = "harvest.json")]
    pub output: String,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub harvest: PathBuf,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Output component to analyze.
    #[arg(long)]
    pub component: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub lrofr: LrofrFlags,
    /// File stem; writes `<stem>-trace.csv` (and `<stem>-lambda.csv`).
    #[arg(short, long)]
    pub output: Option<String>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub harvest: PathBuf,
    #[arg(long, value_enum)]
    pub readout: Option<ReadoutKind>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub lrofr: LrofrFlags,
    #[command(flatten)]
    pub rbf: RbfFlags,
    /// Defaults to `model-<readout>.json`.
    #[arg(short, long)]
    pub output: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Independent evaluation runs; run `i` uses seed `seed + i`.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub mg: MgFlags,
    #[command(flatten)]
    pub protocol: ProtocolFlags,
    #[arg(short, long, default_value = "report.csv")]
    pub output: String,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    pub archive: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    match commands::run(argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::RunError::Usage(e)) => {
            let _ = e.print();
            ExitCode::from(e.exit_code() as u8)
        }
        Err(commands::RunError::Failed(f)) => {
            eprintln!("{f}");
            ExitCode::from(f.category as u8)
        }
    }
}

impl From<Failure> for commands::RunError {
    fn from(f: Failure) -> Self {
        commands::RunError::Failed(f)
    }
}

//! `motion-misc`: scenario generation, simulation, fitting and evaluation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use motion_misc::scenario::HeadTilt;
use motion_misc::OutputVariant;

mod commands;
mod settings;

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;
pub const EXIT_EXCLUDED: u8 = 5;
pub const EXIT_NO_CONVERGENCE: u8 = 6;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl From<motion_misc::Error> for CliError {
    fn from(e: motion_misc::Error) -> Self {
        use motion_misc::Error as E;
        let code = match &e {
            E::Io { .. }
            | E::Csv(_)
            | E::MissingColumn(_)
            | E::NonNumeric { .. }
            | E::NonIncreasing { .. }
            | E::NonUniformSpacing { .. }
            | E::TooFewSamples { .. }
            | E::MiscOutOfRange { .. }
            | E::MiscNonInteger { .. }
            | E::OutOfSpan { .. }
            | E::LengthMismatch { .. } => EXIT_IO,
            E::Invalid(_) | E::UnsolvableProfile(_) => EXIT_USAGE,
            E::NonFinite { .. } => EXIT_NUMERIC,
            E::NoSymptoms => EXIT_EXCLUDED,
            E::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
            E::ZeroVariance | E::Internal(_) => EXIT_OTHER,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

/// Motion sickness (MISC) prediction from head motion.
///
/// Every value flag can also come from `--config FILE` (flat `key = value`
/// lines, keys named like the long flags); flags win over the file, which
/// wins over built-in defaults. Each run writes `manifest.txt` to its output
/// directory, and that file can be passed back as `--config`.
#[derive(Parser)]
#[command(name = "motion-misc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the shuttle session for one head-tilt condition, optionally
    /// with model MISC reports when output parameters are given.
    Scenario(ScenarioArgs),
    /// Run the model over a motion CSV and write `t,dv_norm,misc`.
    Simulate(SimulateArgs),
    /// Identify output-part parameters from motion/MISC pairs.
    Fit(FitArgs),
    /// Pearson r and mean absolute error between observed and predicted MISC.
    Eval(EvalArgs),
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// Flat key=value config file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing [default: .]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time step in seconds; sample spacing for `scenario`, integration step
    /// otherwise [default: 0.01]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output part: msibase, omanap, omanbp or omanhill.
    #[arg(long)]
    pub variant: Option<OutputVariant>,
}

#[derive(Args, Debug, Default)]
pub struct ParamArgs {
    /// Output-part parameter as name=value; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub param: Vec<String>,
    /// `param,value` CSV, e.g. the `params.csv` written by `fit`.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScenarioArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub output: ParamArgs,
    /// Head-tilt condition: static or move [default: static]
    #[arg(long)]
    pub condition: Option<HeadTilt>,
    /// Acceleration magnitude, m/s² [default: 1]
    #[arg(long)]
    pub a_peak: Option<f64>,
    /// Head pitch tracking lag for the move condition, s [default: 0]
    #[arg(long)]
    pub tau_head: Option<f64>,
    /// Traverse length, m [default: 3]
    #[arg(long)]
    pub distance: Option<f64>,
    /// Speed cap, m/s [default: 1.67]
    #[arg(long)]
    pub v_max: Option<f64>,
    /// Pause at each end of a traverse, s [default: 0.5]
    #[arg(long)]
    pub dwell: Option<f64>,
    /// Set length, s [default: 300]
    #[arg(long)]
    pub set_duration: Option<f64>,
    /// Number of sets [default: 4]
    #[arg(long)]
    pub n_sets: Option<usize>,
    /// Break between sets, s [default: 30]
    #[arg(long)]
    pub break_duration: Option<f64>,
    /// Recovery period, s [default: 300]
    #[arg(long)]
    pub recovery_duration: Option<f64>,
    /// MISC report spacing, s [default: 60]
    #[arg(long)]
    pub report_interval: Option<f64>,
    /// Report level that ends the motion challenge [default: 6]
    #[arg(long)]
    pub stop_level: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub output: ParamArgs,
    /// Motion CSV.
    #[arg(long, value_name = "FILE")]
    pub motion: Option<PathBuf>,
    /// Clamp reported MISC to [0, 10].
    #[arg(long)]
    pub clamp: bool,
    /// Resample the motion onto a uniform grid with spacing `--dt`.
    #[arg(long)]
    pub resample: bool,
    /// Keep every n-th integration step in the output [default: 10]
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Motion CSV of one condition; repeatable, paired in order with `--misc`.
    #[arg(long, value_name = "FILE")]
    pub motion: Vec<PathBuf>,
    /// Observed MISC CSV (`t,misc`) of one condition; repeatable.
    #[arg(long, value_name = "FILE")]
    pub misc: Vec<PathBuf>,
    /// Optimizer starts [default: 32]
    #[arg(long)]
    pub starts: Option<usize>,
    /// Iteration cap per start [default: 2000]
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative spread of the simplex values that ends a start [default: 1e-8]
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Search interval as name=lo:hi for beta1, beta2, exponent, b, gain or
    /// tau_i; repeatable.
    #[arg(long, value_name = "NAME=LO:HI")]
    pub bound: Vec<String>,
    /// Fit each condition separately instead of one shared parameter set.
    #[arg(long)]
    pub per_condition: bool,
    /// Accept non-integer MISC observations, e.g. unrounded model output.
    #[arg(long)]
    pub real_misc: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub output: ParamArgs,
    /// Observed MISC CSV of one condition; repeatable.
    #[arg(long, value_name = "FILE")]
    pub observed: Vec<PathBuf>,
    /// Predicted MISC CSV with `t` and `misc` columns, paired with
    /// `--observed`; repeatable.
    #[arg(long, value_name = "FILE")]
    pub predicted: Vec<PathBuf>,
    /// Motion CSV to predict from instead of `--predicted`; repeatable.
    #[arg(long, value_name = "FILE")]
    pub motion: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scenario(a) => commands::scenario(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

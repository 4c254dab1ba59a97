//! `ijt`: instance generation, solving, step-size sweeps, timing benchmarks,
//! thresholding-function tables and solution diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ijt_core::experiments::Algo;
use ijt_core::{LossKind, PenaltyFamily};

use crate::config::{Emit, InitSpec};

#[derive(Debug, Parser)]
#[command(
    name = "ijt",
    version,
    about = "Iterative jumping thresholding for sparse recovery"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the instance (or benchmark) seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: config `output`, else the current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent solves; 1 runs sequentially.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Artifacts to write.
    #[arg(long, global = true, value_delimiter = ',')]
    pub emit: Option<Vec<Emit>>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a Gaussian sensing instance and write it to files.
    Gen(GenArgs),
    /// Solve one instance and write the trace, a summary and diagnostics.
    Solve(SolveArgs),
    /// Iteration count and MSE over a uniform grid of step sizes in (0, 1/L).
    SweepMu(SweepArgs),
    /// Wall time of IJT and the reweighted baselines over problem sizes.
    Bench(BenchArgs),
    /// Sample a scalar thresholding function.
    ProxTable(ProxTableArgs),
    /// Diagnostics report for a candidate solution.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "M")]
    pub m: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Entry variance of A.
    #[arg(long, conflicts_with = "var_inv_m")]
    pub variance: Option<f64>,
    /// Entry variance 1/M (the default).
    #[arg(long = "var-inv-M")]
    pub var_inv_m: bool,
    /// Amplitudes of the non-zero entries.
    #[arg(long, value_enum)]
    pub amplitude: Option<Amplitude>,
    /// File name stem.
    #[arg(long, default_value = "instance")]
    pub stem: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Amplitude {
    StdNormal,
    PlusMinusOne,
}

/// Instance, penalty and solver settings that override the config file.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// Matrix file (instance given by files).
    #[arg(long = "A")]
    pub a: Option<PathBuf>,
    #[arg(long)]
    pub y: Option<PathBuf>,
    #[arg(long)]
    pub x_true: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, conflicts_with = "mu_frac")]
    pub mu: Option<f64>,
    /// Step size as a fraction of 1/L.
    #[arg(long)]
    pub mu_frac: Option<f64>,
    /// zero, l1 or file:<path>.
    #[arg(long, value_parser = InitSpec::parse)]
    pub init: Option<InitSpec>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossArg {
    LeastSquares,
    Logistic,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::LeastSquares => LossKind::LeastSquares,
            LossArg::Logistic => LossKind::Logistic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Power,
    LogPower,
}

impl From<FamilyArg> for PenaltyFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Power => PenaltyFamily::Power,
            FamilyArg::LogPower => PenaltyFamily::LogPower,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgoArg {
    Ijt,
    Irls,
    Irl1,
    Soft,
    Hard,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Ijt => Algo::Ijt,
            AlgoArg::Irls => Algo::Irls,
            AlgoArg::Irl1 => Algo::Irl1,
            AlgoArg::Soft => Algo::Soft,
            AlgoArg::Hard => Algo::Hard,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long, value_enum)]
    pub algo: Option<AlgoArg>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Number of step sizes.
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    /// Exponents to sweep (default: the configured penalty's q).
    #[arg(long = "qs", value_delimiter = ',')]
    pub qs: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Problem sizes N; M = N/5.
    #[arg(long, value_delimiter = ',', default_values_t = [250, 500, 750, 1000, 1250, 1500])]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Timed repetitions per cell (median reported).
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mu_frac: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ProxTableArgs {
    #[arg(long, value_enum, default_value = "jump")]
    pub rule: RuleArg,
    #[arg(long, value_enum, default_value = "power")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = 601)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Jump,
    Soft,
    Hard,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Candidate solution vector file.
    #[arg(long)]
    pub solution: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Last step norm, for the a-posteriori error bound.
    #[arg(long)]
    pub last_step: Option<f64>,
    /// Also compare the fixed-point map at the solution with the brute-force prox oracle.
    #[arg(long)]
    pub oracle: bool,
}

/// Failures mapped to exit codes: 1 for usage, configuration and input
/// errors, 2 when a run did not converge.
pub enum Outcome {
    Done,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.common.verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    match commands::run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: run did not converge");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

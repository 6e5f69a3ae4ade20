//! Command-line front end: dataset generation, solves with convergence traces,
//! reference optima and the linear-rate certificate check.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
pub mod output;
pub mod problem;

use std::ffi::OsString;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;

use cfista::data::{DataError, ModelKind};
use cfista::engine::EngineError;
use cfista::models::ModelError;
use clap::{Parser, Subcommand};
use thiserror::Error;

pub use problem::{Algorithm, Flavor, ModelArgs};

pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const CONDITION: i32 = 4;
    pub const NOT_CONVERGED: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("did not converge: {0}")]
    NotConverged(String),
    #[error("check failed")]
    CheckFailed,
    #[error("internal error: {0}")]
    Internal(String),
}

fn engine_code(e: &EngineError) -> i32 {
    match e {
        EngineError::ConditionViolated(_) | EngineError::NonPositiveScale(_) => exit::CONDITION,
        EngineError::NonFiniteValue(_) => exit::NOT_CONVERGED,
        EngineError::ZeroIterationBudget => exit::USAGE,
        EngineError::DimensionMismatch { .. } => exit::IO,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io(_) | CliError::Json(_) | CliError::Internal(_) => exit::IO,
            CliError::Data(e) => match e {
                DataError::PatternMismatch { .. }
                | DataError::OddSampleCount(_)
                | DataError::InvalidSpec(_) => exit::USAGE,
                _ => exit::IO,
            },
            CliError::Engine(e) => engine_code(e),
            CliError::Model(e) => match e {
                ModelError::Engine(e) => engine_code(e),
                ModelError::ZeroMatrix => exit::CONDITION,
                ModelError::DimensionMismatch { .. } => exit::IO,
                _ => exit::USAGE,
            },
            CliError::NotConverged(_) => exit::NOT_CONVERGED,
            CliError::CheckFailed => exit::CHECK_FAILED,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cfista",
    version,
    about = "Accelerated composite proximal-gradient solver toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    Gen(GenArgs),
    /// Solve a dataset and write a convergence trace.
    Solve(SolveArgs),
    /// Solve to high accuracy and store the optimum for gap computation.
    Reference(ReferenceArgs),
    /// Replay the accelerated solve and check the linear-rate certificate.
    Check(CheckArgs),
}

#[derive(Debug, clap::Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "lasso")]
    pub model: ModelChoice,
    /// Rows; 800 for lasso and 100 for logistic by default.
    #[arg(long)]
    pub m: Option<usize>,
    /// Columns; 400 for lasso and 500 for logistic by default.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub group_size: usize,
    /// Offset between consecutive group starts; 0 gives disjoint groups.
    #[arg(long, default_value_t = 0)]
    pub overlap_stride: usize,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelChoice {
    Lasso,
    Logistic,
}

impl From<ModelChoice> for ModelKind {
    fn from(m: ModelChoice) -> Self {
        match m {
            ModelChoice::Lasso => ModelKind::Lasso,
            ModelChoice::Logistic => ModelKind::Logistic,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "cfista")]
    pub algorithm: Algorithm,
    /// Stop when the gradient-mapping norm is at most this.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Stop when the residual has not improved for this many iterations.
    #[arg(long)]
    pub stall_window: Option<usize>,
    /// Trace CSV path; a manifest is written next to it.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Reference file from `reference`; fills the trace's gap column.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Record wall-clock times in the trace (makes traces differ between runs).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, clap::Args)]
pub struct ReferenceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1e-14)]
    pub tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iter: usize,
    /// Accept the run once the residual has not improved for this many iterations:
    /// the tolerance can lie below what rounding allows.
    #[arg(long, default_value_t = 2_000)]
    pub stall_window: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct CheckArgs {
    /// Dataset directory; the model settings default to those stored in the reference.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iter: usize,
    /// Stop the replay once the residual has not improved for this many iterations.
    #[arg(long, default_value_t = 500)]
    pub stall_window: usize,
    /// Relative slack on every inequality.
    #[arg(long, default_value_t = 1e-8)]
    pub slack: f64,
    /// Iterations are checked while the Lyapunov value exceeds `noise_factor * V(0)`.
    #[arg(long, default_value_t = 1e-14)]
    pub noise_factor: f64,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub lipschitz: Option<f64>,
    #[arg(long, default_value_t = 1e-12)]
    pub inner_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub inner_max_iter: usize,
    #[arg(long, hide = true)]
    pub theta_scale: Option<f64>,
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::SUCCESS
            };
        }
    };
    let echo: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let result = panic::catch_unwind(AssertUnwindSafe(|| commands::dispatch(cli.command, &echo)));
    let result = result.unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(CliError::Internal(msg))
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            if !matches!(e, CliError::CheckFailed) {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}

//! `l1pred`: risk curves, restricted-parameter comparisons, uniform-target
//! closed forms, the uniform-model Bayes predictive, and a validation suite,
//! all writing CSV with a `#` metadata header (or a short text report).
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 validation failure.

// Same guard idiom as the library: `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// A problem with flags, config files, or spec strings.
    Config(String),
    /// An error surfaced by the numerical engine.
    Engine(l1pred::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => f.write_str(msg),
            CliError::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl From<l1pred::Error> for CliError {
    fn from(e: l1pred::Error) -> Self {
        CliError::Engine(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Engine(e) => match e {
                l1pred::Error::Parse(_)
                | l1pred::Error::InvalidInput(_)
                | l1pred::Error::Unsupported(_) => 2,
                l1pred::Error::NoConvergence(_)
                | l1pred::Error::InconsistentData(_)
                | l1pred::Error::NoValidDensity(_) => 3,
            },
        }
    }
}

/// Integrated-L1 risk of scale-expanded plug-in predictive densities.
#[derive(Parser)]
#[command(name = "l1pred", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Risk of the expanded plug-in along a scale grid, as CSV.
    RiskCurve(JobArgs),
    /// Restricted-parameter risk curves over a grid of center norms, as CSV.
    RestrictedCurve(JobArgs),
    /// Risk table for uniform-ball targets across dimensions, as CSV.
    Uniform(JobArgs),
    /// Posterior-median predictive for the uniform location model.
    BayesUniform(BayesArgs),
    /// Cross-check closed forms against independent routes.
    Validate(ValidateArgs),
}

/// Settings for the CSV-producing jobs. Anything not given here may come
/// from `--config`; a flag always wins over the file.
#[derive(Args)]
pub struct JobArgs {
    /// Sampling model: normal:d=3,var=1 | uniball:d=3,m=1 |
    /// mixnormal:d=2,mix=invgamma(0.5,0.5) | midrange:n=5,a=1.
    #[arg(long)]
    pub p: Option<String>,

    /// Plug-in family (defaults to the sampling model).
    #[arg(long)]
    pub q: Option<String>,

    /// Loss transform applied to the integrated absolute difference:
    /// identity or power:k.
    #[arg(long)]
    pub gamma: Option<String>,

    /// Expansion-factor grid start:end:step, both endpoints included.
    #[arg(long)]
    pub c_grid: Option<String>,

    /// Center-norm grid start:end:step for restricted curves.
    #[arg(long)]
    pub lambda_grid: Option<String>,

    /// Restriction radius of the center (and uniform target radius).
    #[arg(long)]
    pub m: Option<f64>,

    /// Expansion factor for the restricted comparison column (default 1.05).
    #[arg(long)]
    pub c: Option<f64>,

    /// Center estimator: raw or mle-ball.
    #[arg(long)]
    pub estimator: Option<String>,

    /// Dimensions for the uniform table, comma separated (default 1,2,3,4,5).
    #[arg(long)]
    pub dims: Option<String>,

    /// Outer quadrature node count (default 256).
    #[arg(long)]
    pub quad_nodes: Option<usize>,

    /// Probability mass ignored beyond the radial truncation point
    /// (default 1e-10).
    #[arg(long)]
    pub tail_mass: Option<f64>,

    /// Monte Carlo draws per restricted-risk evaluation (default 100000).
    #[arg(long)]
    pub mc_n: Option<usize>,

    /// Draws per batch in bootstrap standard errors (default 2000).
    #[arg(long)]
    pub mc_batch: Option<usize>,

    /// RNG seed; recorded in every output (default 17).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// TOML file supplying any of the above keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct BayesArgs {
    /// Observations as a comma list, e.g. 0.3 or 0.1,0.4,0.2.
    #[arg(long, conflicts_with = "data_file")]
    pub data: Option<String>,

    /// File of whitespace-separated observations.
    #[arg(long)]
    pub data_file: Option<PathBuf>,

    /// Sampling half-width: observations are uniform on [center - a,
    /// center + a].
    #[arg(long)]
    pub a: Option<f64>,

    /// Target half-width: the future draw is uniform on [center - b,
    /// center + b].
    #[arg(long)]
    pub b: Option<f64>,

    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// TOML file supplying any of the above keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    /// quick: deterministic checks, a few seconds. full: adds the sampling
    /// batteries (restricted dominance, curve crossing, oracle risk routes).
    #[arg(long, default_value = "quick")]
    pub tier: String,
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Cmd::RiskCurve(args) => {
            commands::risk_curve_cmd(&config::Job::resolve(args)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::RestrictedCurve(args) => {
            commands::restricted_curve_cmd(&config::Job::resolve(args)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Uniform(args) => {
            commands::uniform_cmd(&config::Job::resolve(args)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::BayesUniform(args) => {
            commands::bayes_uniform_cmd(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Validate(args) => commands::validate_cmd(&args.tier),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

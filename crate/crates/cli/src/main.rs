mod commands;
mod error;
mod ingest;
mod models;
mod registry;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::CliError;
use crate::report::{envelope, Output};

/// Proper scoring rules: scoring, minimum-score estimation, Markov random
/// field fits and model comparison.
#[derive(Debug, Parser)]
#[command(name = "scorelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
enum Command {
    /// Score observations under one member of a family.
    Score(ScoreArgs),
    /// Minimum-score estimate with sandwich asymptotics.
    Estimate(EstimateArgs),
    /// Tridiagonal Gaussian chain fit by the Hyvärinen score.
    GmrfFit(GmrfArgs),
    /// Hyvärinen estimate of a precision matrix from a scatter matrix.
    WishartFit(WishartArgs),
    /// Compare models by the score of their marginal distributions.
    Compare(CompareArgs),
    /// Prequential Hyvärinen scores of normal linear models.
    Preq(PreqArgs),
    /// Seeded replicate study of an estimator.
    Simulate(SimulateArgs),
    /// Brute-force propriety check on a probability lattice.
    CheckPropriety(ProprietyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Score(_) => "score",
            Command::Estimate(_) => "estimate",
            Command::GmrfFit(_) => "gmrf-fit",
            Command::WishartFit(_) => "wishart-fit",
            Command::Compare(_) => "compare",
            Command::Preq(_) => "preq",
            Command::Simulate(_) => "simulate",
            Command::CheckPropriety(_) => "check-propriety",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RuleArgs {
    /// log, brier, tsallis, bregman, hyvarinen, survival or from-loss.
    #[arg(long)]
    pub rule: String,
    /// γ for the Tsallis rule.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Convex function for Bregman rules: tlogt, brier or power:<γ>.
    #[arg(long)]
    pub psi: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FamilyArgs {
    /// normal-location, logistic-location, cauchy-location,
    /// extreme-value-location, normal or bernoulli.
    #[arg(long)]
    pub family: String,
    /// Known scale of a location family.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub rule: RuleArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Parameter of the quoted member, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub theta: Vec<f64>,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub rule: RuleArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Starting point, comma separated; the family's guess otherwise.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GmrfArgs {
    /// One chain per row, one site per column.
    #[arg(long)]
    pub data: PathBuf,
    /// Also fit on the boundary of Ω, this far inside it, when the free fit
    /// falls outside.
    #[arg(long)]
    pub refit_epsilon: Option<f64>,
    /// Also compute the exact maximum-likelihood estimate.
    #[arg(long)]
    pub mle: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WishartArgs {
    /// Raw vectors, one per row; S is formed from them.
    #[arg(long, conflicts_with = "scatter")]
    pub data: Option<PathBuf>,
    /// A precomputed N×N scatter matrix; needs --nu.
    #[arg(long, requires = "nu")]
    pub scatter: Option<PathBuf>,
    #[arg(long)]
    pub nu: Option<usize>,
    /// Restrict the fit to tridiagonal Φ.
    #[arg(long)]
    pub tridiagonal: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    /// Lower end of the parameter quadrature box for location models.
    #[arg(long, allow_hyphen_values = true)]
    pub grid_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_hi: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    /// log or hyvarinen.
    #[arg(long)]
    pub rule: String,
    /// Model-set file (JSON).
    #[arg(long)]
    pub models: PathBuf,
    /// Responses, a single column.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PreqArgs {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Include every one-step term in the report.
    #[arg(long)]
    pub terms: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// A family from the registry, or gmrf.
    #[arg(long)]
    pub family: String,
    /// Needed unless the family is gmrf.
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub psi: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// True parameter, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Option<Vec<f64>>,
    /// Observations per replicate.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    /// Master seed; replicate r uses stream r.
    #[arg(long, env = "SCORELAB_SEED")]
    pub seed: Option<u64>,
    /// Chain model for gmrf.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub sites: Option<usize>,
    /// Chains per replicate for gmrf.
    #[arg(long, default_value_t = 1)]
    pub nu: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProprietyArgs {
    #[command(flatten)]
    pub rule: RuleArgs,
    /// Number of outcomes, 2 to 4.
    #[arg(long, default_value_t = 2)]
    pub support: usize,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
}

fn dispatch(command: &Command) -> Result<Output, CliError> {
    match command {
        Command::Score(a) => commands::score(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::GmrfFit(a) => commands::gmrf_fit(a),
        Command::WishartFit(a) => commands::wishart_fit(a),
        Command::Compare(a) => commands::compare(a),
        Command::Preq(a) => commands::preq(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::CheckPropriety(a) => commands::check_propriety(a),
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(3);
        }
    }
    let start = Instant::now();
    let config = serde_json::to_value(&cli.command).unwrap_or(serde_json::Value::Null);
    let outcome = dispatch(&cli.command);
    let seconds = start.elapsed().as_secs_f64();
    let (report, code) = match &outcome {
        Ok(output) => {
            let code = if output.failure.is_some() { 3 } else { 0 };
            (envelope(cli.command.name(), config, Some(output), output.failure.clone(), seconds), code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            (envelope(cli.command.name(), config, None, Some(e.to_string()), seconds), e.exit_code())
        }
    };
    let mut text = serde_json::to_string_pretty(&report).expect("reports contain only JSON values");
    text.push('\n');
    if let Err(e) = emit(&text, cli.out.as_ref()) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}

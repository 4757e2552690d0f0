//! Command-line front end for the step-selection toolkit.
//!
//! Subcommands: `simulate` (synthetic datasets), `fit` (GLM / DNN / spline),
//! `explain` (effects, importance, ALE, bi-plots), `bench` (the five canned
//! experiments), and `config` (defaults inspection). Exit codes are stable:
//! 0 ok, 2 config error, 3 data validation, 4 non-convergence, 5 capability
//! mismatch, 6 benchmark completion shortfall.

mod commands;
mod config;
mod svg;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Build identifier embedded in manifests and printed by --version.
pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }
    pub fn convergence(message: impl Into<String>) -> Self {
        CliError { code: 4, message: message.into() }
    }
    pub fn capability(message: impl Into<String>) -> Self {
        CliError { code: 5, message: message.into() }
    }
    pub fn shortfall(message: impl Into<String>) -> Self {
        CliError { code: 6, message: message.into() }
    }
    pub fn io(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
}

#[derive(Parser)]
#[command(name = "stepsel", version = env!("CARGO_PKG_VERSION"), about = "Step-selection analysis: simulate, fit, explain, benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic strata dataset plus its ground-truth sidecar
    Simulate(SimulateArgs),
    /// Fit a step-selection model to a dataset CSV
    Fit(FitArgs),
    /// Explain a fitted model (effects, importance, ALE, bi-plot)
    Explain(ExplainArgs),
    /// Run benchmark scenarios end to end
    Bench(BenchArgs),
    /// Configuration helpers
    Config(ConfigArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Scenario 1-5
    #[arg(long)]
    pub scenario: Option<u8>,
    /// True slope for scenario 1 [default: 1]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Nonlinear truth for scenario 2: hump | wiggle | constant [default: hump]
    #[arg(long)]
    pub truth: Option<String>,
    /// Number of strata [default: 2000]
    #[arg(long)]
    pub strata: Option<usize>,
    /// Control steps per stratum [default: 9]
    #[arg(long)]
    pub controls: Option<usize>,
    /// Opponent groups for scenario 5 [default: 3]
    #[arg(long)]
    pub groups: Option<usize>,
    /// RNG seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for data.csv and truth.json
    #[arg(short, long)]
    pub out: PathBuf,
    /// JSON config file (flags override its values)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct FitArgs {
    /// Dataset CSV (stepsel interchange format)
    #[arg(long)]
    pub data: PathBuf,
    /// Model family: glm | dnn | spline
    #[arg(long)]
    pub model: String,
    /// GLM formula, e.g. "x1+x2+x1:x2" [default: all main effects]
    #[arg(long)]
    pub formula: Option<String>,
    /// Hidden layer widths, e.g. "32,32" [default: 32,32]
    #[arg(long)]
    pub hidden: Option<String>,
    /// Activation: relu | selu | tanh [default: relu]
    #[arg(long)]
    pub activation: Option<String>,
    /// Dropout rate on hidden activations [default: 0]
    #[arg(long)]
    pub dropout: Option<f64>,
    /// L2 penalty weight [default: 0]
    #[arg(long)]
    pub l2: Option<f64>,
    /// L1 penalty weight [default: 0]
    #[arg(long)]
    pub l1: Option<f64>,
    /// Embedding layer as target:dim, e.g. "individual:2" or "opponent:2"
    #[arg(long)]
    pub embed: Option<String>,
    /// Embedding wiring: concat | modulation [default: concat]
    #[arg(long)]
    pub embed_wiring: Option<String>,
    /// Learning rate [default: 0.01]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Training epochs [default: 150]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Strata per minibatch [default: 64]
    #[arg(long)]
    pub batch: Option<usize>,
    /// Optimizer: adam | sgd [default: adam]
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Early stopping patience in epochs (off when absent)
    #[arg(long)]
    pub patience: Option<usize>,
    /// Smoothed feature for spline fits, by name or index [default: first]
    #[arg(long)]
    pub feature: Option<String>,
    /// Interior knots for spline fits [default: 20]
    #[arg(long)]
    pub knots: Option<usize>,
    /// Spline degree [default: 3]
    #[arg(long)]
    pub degree: Option<usize>,
    /// Fixed ridge penalty (skips cross-validated grid search)
    #[arg(long)]
    pub penalty: Option<f64>,
    /// Cross-validation folds for the penalty grid [default: 5]
    #[arg(long)]
    pub cv_folds: Option<usize>,
    /// Seed for initialization and shuffling [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(short, long)]
    pub out: PathBuf,
    /// JSON config file (flags override its values)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExplainArgs {
    #[command(subcommand)]
    pub action: ExplainAction,
}

#[derive(Subcommand)]
pub enum ExplainAction {
    /// Average conditional effects with bootstrap confidence intervals
    Ace(ExplainCommon),
    /// Permutation importance per feature
    Importance(ExplainCommon),
    /// Pairwise interaction importance
    Interactions(ExplainCommon),
    /// Accumulated local effect curve for one feature
    Ale(ExplainCommon),
    /// Embedding positions and effect arrows
    Biplot(ExplainCommon),
}

#[derive(Args)]
pub struct ExplainCommon {
    /// Fitted model JSON
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset CSV the model is explained against
    #[arg(long)]
    pub data: PathBuf,
    /// Bootstrap replicates for ace [default: 20]
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Permutation draws for importance/interactions [default: 5]
    #[arg(long)]
    pub permutations: Option<usize>,
    /// Bins for ale [default: 20]
    #[arg(long)]
    pub bins: Option<usize>,
    /// Feature for ale, by name or index
    #[arg(long)]
    pub feature: Option<String>,
    /// Finite-difference step (default: 0.1 x feature SD)
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// RNG seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Additionally render a standalone SVG plot
    #[arg(long)]
    pub svg: bool,
    /// Output directory
    #[arg(short, long)]
    pub out: PathBuf,
    /// JSON config file (flags override its values)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Scenario to run: 1-5 or "all"
    #[arg(long)]
    pub scenario: String,
    /// Repetitions per scenario [default: scenario-specific]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Strata per repetition [default: scenario-specific]
    #[arg(long)]
    pub strata: Option<usize>,
    /// Control steps per stratum [default: 9]
    #[arg(long)]
    pub controls: Option<usize>,
    /// Bootstrap replicates for DNN inference [default: 20]
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads [default: available parallelism]
    #[arg(long)]
    pub threads: Option<usize>,
    /// Results directory
    #[arg(short, long)]
    pub out: PathBuf,
    /// JSON config file (flags override its values)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ConfigArgs {
    #[command(subcommand)]
    pub action: ConfigAction,
}

#[derive(Subcommand)]
pub enum ConfigAction {
    /// Print the default configuration as JSON
    ShowDefaults,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Fit(args) => commands::fit(args),
        Command::Explain(args) => commands::explain(args),
        Command::Bench(args) => commands::bench(args),
        Command::Config(args) => commands::config_cmd(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use featgrad::error::ErrorKind;

mod commands;
mod config;

#[derive(Parser)]
#[command(
    name = "featgrad",
    version,
    about = "Feature selection by estimator gradients"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit feature scores and write a ranking.
    Select(SelectArgs),
    /// Test AUC of logistic models on top-m subsets of a ranking.
    Evaluate(EvaluateArgs),
    /// Rank features with a univariate filter.
    Baseline(BaselineArgs),
    /// Generate an equicorrelated Gaussian dataset.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
pub struct DataArgs {
    /// Column holding the label in CSV input.
    #[arg(long, default_value_t = 0)]
    pub label_col: usize,
    /// Feature count for svmlight input, when the file does not reach it.
    #[arg(long)]
    pub n_features: Option<usize>,
}

#[derive(Args)]
pub struct SelectArgs {
    /// Training data (svmlight, or CSV when the name ends in .csv).
    #[arg(long, required_unless_present = "replay")]
    pub data: Option<PathBuf>,
    /// Validation data for the lambda grid.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    /// Held-out share of --data used for validation when no file is given.
    #[arg(long, default_value_t = 0.25)]
    pub validation_fraction: f64,
    #[command(flatten)]
    pub data_args: DataArgs,
    /// Estimator order k.
    #[arg(long, default_value_t = 6)]
    pub order: usize,
    /// Comma-separated coefficients; overrides --order.
    #[arg(long, value_delimiter = ',')]
    pub coeffs: Option<Vec<f64>>,
    /// `exact` or `capped:<n>`.
    #[arg(long, default_value = "exact")]
    pub denominator: String,
    /// Single penalty weight.
    #[arg(long, conflicts_with = "lambda_grid", allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Comma-separated penalty weights searched on validation AUC.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambda_grid: Option<Vec<f64>>,
    /// Subset sizes reported and used for the validation score.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub sizes: Vec<usize>,
    /// Rows per micro-batch; full batch when absent.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Rows accumulated per optimizer step in mini-batch mode.
    #[arg(long, default_value_t = 1000)]
    pub accumulate: usize,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fit preprocessing statistics on this many sampled rows.
    #[arg(long)]
    pub subsample_stats: Option<usize>,
    /// Split operator sweeps into fixed row blocks run on all cores.
    #[arg(long)]
    pub parallel: bool,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long, conflicts_with = "lambda_grid")]
    pub resume: Option<PathBuf>,
    /// Re-run a config.json written by an earlier run.
    #[arg(long, conflicts_with = "data")]
    pub replay: Option<PathBuf>,
    #[arg(long, default_value = "featgrad-out")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub ranking: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub data_args: DataArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    /// Second ranking; prints a paired t-test over the sizes.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    #[arg(long, default_value = "evaluation.csv")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Batch)]
    pub mode: Mode,
    #[arg(long, default_value_t = 1e-6)]
    pub l2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Mode {
    Batch,
    Sgd,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Method {
    Anova,
    Mi,
}

#[derive(Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub data_args: DataArgs,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Equal-width bins per feature for mutual information.
    #[arg(long, default_value_t = featgrad::baselines::DEFAULT_MI_BINS)]
    pub bins: usize,
    #[arg(long, default_value = "ranking.txt")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Svmlight,
    Csv,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub support: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub correlation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Svmlight)]
    pub format: Format,
    #[arg(long, default_value = "synth")]
    pub out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Select(a) => commands::select(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Synth(a) => commands::synth(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            })
        }
    }
}

//! `kpcast`: batch command-line front end for the Kp forecasting pipeline.
//!
//! Exit status is 0 on success, 1 for usage errors (bad flags or config
//! values) and 2 for data errors (unreadable or malformed inputs).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Error raised for invalid flags or configuration values.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "kpcast", version, about = "Early Kp index prediction from fused solar-wind, Dst and Kp records")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate seeded synthetic solar-wind, Dst and Kp files.
    Synth(SynthArgs),
    /// Fuse the three source files into a lagged-feature dataset CSV.
    Fuse(FuseArgs),
    /// Train a forest or linear model on a dataset CSV.
    Train(TrainArgs),
    /// Predict targets for a dataset CSV with a saved model.
    Predict(PredictArgs),
    /// Rank a forest model's features by impurity importance.
    Importance(ImportanceArgs),
    /// Run one experiment plan end to end and report accuracy.
    Evaluate(EvaluateArgs),
    /// Run several plans on the same data and tabulate accuracy.
    Compare(CompareArgs),
    /// Project a dataset onto its principal components for plotting.
    Pca(PcaArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Generator seed.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Number of days to simulate, starting 2021-01-01T00:00Z.
    #[arg(long, default_value_t = 120)]
    pub days: u32,
    /// Expected storm onsets per day.
    #[arg(long, default_value_t = 0.06)]
    pub storm_rate: f64,
    /// Multiplier on every noise term (0 gives noiseless series).
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Output directory for solar_wind.csv, dst.csv and kp.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SourceArgs {
    /// Flat key/value experiment file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding solar_wind.csv, dst.csv and kp.csv.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Solar-wind CSV (overrides --data-dir).
    #[arg(long)]
    pub solar: Option<PathBuf>,
    /// Dst CSV (overrides --data-dir).
    #[arg(long)]
    pub dst: Option<PathBuf>,
    /// Kp CSV (overrides --data-dir).
    #[arg(long)]
    pub kp: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct LagArgs {
    /// Solar-wind lookback in minutes [default: 540].
    #[arg(long)]
    pub sw_lookback: Option<u32>,
    /// Solar-wind lag step in minutes [default: 5].
    #[arg(long)]
    pub sw_step: Option<u32>,
    /// Dst lookback in hours [default: 3].
    #[arg(long)]
    pub dst_lookback: Option<u32>,
    /// Kp lookback in hours [default: 24].
    #[arg(long)]
    pub kp_lookback: Option<u32>,
    /// Forecast horizon in hours, a multiple of 3 [default: 3].
    #[arg(long)]
    pub horizon: Option<u32>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct ForestArgs {
    /// Number of trees [default: 100].
    #[arg(long)]
    pub trees: Option<usize>,
    /// Features tried per split: an integer or `default` (p/3) [default: default].
    #[arg(long)]
    pub mtry: Option<String>,
    /// Largest node size that is not split further [default: 5].
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Master seed; every stage derives its own stream from it [default: 7].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grow every tree on the full training set instead of a bootstrap sample.
    #[arg(long)]
    pub no_bootstrap: bool,
    /// Worker threads for tree construction [default: available cores].
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct PlanArgs {
    /// Model kind: `forest` or `linear` [default: forest].
    #[arg(long)]
    pub model: Option<String>,
    /// Keep the top-k ranked features: an integer or `all` [default: all].
    #[arg(long = "k")]
    pub k_features: Option<String>,
    /// Keep 1/L of training rows with Kp at or below the threshold [default: 1].
    #[arg(long = "downsample-l")]
    pub downsample_l: Option<u32>,
    /// Kp threshold separating storm rows from downsampled rows [default: 4].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// First test instant, e.g. 2021-10-01T00:00Z; rows before it train.
    #[arg(long)]
    pub cutoff: Option<String>,
    /// Without --cutoff, fraction of the Kp record used for training [default: 0.75].
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FuseArgs {
    #[command(flatten)]
    pub sources: SourceArgs,
    #[command(flatten)]
    pub lags: LagArgs,
    /// Output dataset CSV (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset CSV produced by `fuse`.
    #[arg(long)]
    pub data: PathBuf,
    /// Model kind: `forest` or `linear`.
    #[arg(long, default_value = "forest")]
    pub model: String,
    #[command(flatten)]
    pub forest: ForestArgs,
    /// Output model JSON (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model JSON produced by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset CSV; columns are matched to the model's features by name.
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV `row_time,predicted,actual` (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ImportanceArgs {
    /// Forest model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Only list the first k features.
    #[arg(long)]
    pub top: Option<usize>,
    /// Output CSV `rank,feature,importance` (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub sources: SourceArgs,
    #[command(flatten)]
    pub lags: LagArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Print the report as `text` or `json`.
    #[arg(long, default_value = "text")]
    pub format: String,
    /// Also write report.json, report.txt and predictions.csv here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub sources: SourceArgs,
    #[command(flatten)]
    pub lags: LagArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Comma-separated plan labels, e.g. "RF,RF top-50 L=2,Linear"
    /// [default: RF, RF top-100, RF top-50, RF top-50 L=2, Linear].
    #[arg(long)]
    pub plans: Option<String>,
    /// Print the table as `text` or `csv`.
    #[arg(long, default_value = "text")]
    pub format: String,
    /// Also write comparison.csv, comparison.txt and reports.json here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PcaArgs {
    /// Dataset CSV produced by `fuse`.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of components.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Scale features to unit variance before the decomposition.
    #[arg(long)]
    pub standardize: bool,
    /// Output CSV `pc1,pc2,kp_label` (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(
            kpcast_core::Error::InvalidConfig(_) | kpcast_core::Error::KOutOfRange { .. },
        ) = cause.downcast_ref::<kpcast_core::Error>()
        {
            return 1;
        }
    }
    2
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
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

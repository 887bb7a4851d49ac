//! `bev`: generate, filter, fit, train, predict and evaluate frontal to
//! bird's-eye box projection models.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Frontal-to-bird's-eye bounding box projection pipeline.
///
/// Every parameter can be set in a TOML file passed with --config (sections
/// scene, rules, hyper, grid, features, eval, plus a top-level seed); flags
/// override the file. The effective configuration is written to
/// <out>/effective_config.toml. Exit status: 0 success, 1 usage error,
/// 2 data error.
#[derive(Parser, Debug)]
#[command(name = "bev", version)]
pub struct Cli {
    /// Seed for every random source [default: 0, or `seed` from --config]
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset
    Generate(GenerateArgs),
    /// Drop unreliable records and report rejections per rule
    Filter(FilterArgs),
    /// Train an MLP or SDPN model
    Train(TrainArgs),
    /// Fit a homography or grid model
    Fit(FitArgs),
    /// Predict bird's-eye boxes for a dataset
    Predict(PredictArgs),
    /// Evaluate stored predictions, or a model on a dataset
    Eval(EvalArgs),
    /// Evaluate several models on one dataset into a joint report
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Number of frames to simulate
    #[arg(long, default_value_t = 1000)]
    pub frames: u64,
    /// Use the model comparison benchmark scene instead of [scene]
    #[arg(long)]
    pub benchmark: bool,
    /// Fraction of frames (the last ones) written to test.jsonl; with 0 a
    /// single dataset.jsonl is written
    #[arg(long, default_value_t = 0.0)]
    pub test_fraction: f64,
    /// Bird's-eye box jitter in px [default: scene.noise.jitter_px]
    #[arg(long)]
    pub jitter_px: Option<f64>,
    /// Probability of a corrupted bird's-eye box [default: scene.noise.absurd_size_prob]
    #[arg(long)]
    pub absurd_prob: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FilterArgs {
    /// Dataset to filter
    #[arg(long)]
    pub input: PathBuf,
    /// Filtered dataset path [default: <out>/filtered.jsonl]
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetKind {
    Mlp,
    Sdpn,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitKind {
    Homography,
    Grid,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub kind: NetKind,
    /// Training dataset
    #[arg(long)]
    pub train: PathBuf,
    /// Validation dataset [default: the last --val-fraction of --train]
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Share of training records held out for early stopping when --val is absent
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    /// Maximum epochs [default: hyper.max_epochs = 100]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [default: hyper.batch_size = 128]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate [default: hyper.lr = 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Per-epoch learning-rate decay factor [default: hyper.lr_decay = 1]
    #[arg(long)]
    pub lr_decay: Option<f64>,
    /// Early-stopping patience in epochs [default: hyper.patience = 10]
    #[arg(long)]
    pub patience: Option<usize>,
    /// Feature file (BEVFEAT1) [default: features.file, else synthetic features]
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Synthetic feature dimension [default: features.dim = 2048]
    #[arg(long)]
    pub feature_dim: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub kind: FitKind,
    /// Training dataset
    #[arg(long)]
    pub train: PathBuf,
    /// Grid cell size in px [default: grid.cell_px = 10]
    #[arg(long)]
    pub cell_px: Option<u32>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model artifact (homography JSON, grid CSV or network container)
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset to predict on
    #[arg(long)]
    pub input: PathBuf,
    /// Feature file for SDPN [default: features.file, else the model's own source]
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Sample grid cells with this seed instead of taking the most frequent cell
    #[arg(long)]
    pub grid_sample_seed: Option<u64>,
    /// Predictions path [default: <out>/predictions.jsonl]
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Predictions file written by `predict`
    #[arg(long, conflicts_with_all = ["model", "input"], required_unless_present = "model")]
    pub predictions: Option<PathBuf>,
    /// Model artifact to run instead of reading predictions
    #[arg(long, requires = "input")]
    pub model: Option<PathBuf>,
    /// Dataset for --model
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Row name in metrics.csv [default: the model kind, or the predictions file stem]
    #[arg(long)]
    pub name: Option<String>,
    /// Feature file for SDPN [default: features.file, else the model's own source]
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Sample grid cells with this seed instead of taking the most frequent cell
    #[arg(long)]
    pub grid_sample_seed: Option<u64>,
    /// Comma-separated distance bucket edges in m [default: eval.bucket_edges = 5,10,15,20,25,30]
    #[arg(long, value_delimiter = ',')]
    pub bucket_edges: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Model artifacts, one report row each
    #[arg(long = "model", required = true, num_args = 1..)]
    pub models: Vec<PathBuf>,
    /// Test dataset
    #[arg(long)]
    pub input: PathBuf,
    /// Feature file for SDPN [default: features.file, else each model's own source]
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Sample grid cells with this seed instead of taking the most frequent cell
    #[arg(long)]
    pub grid_sample_seed: Option<u64>,
    /// Comma-separated distance bucket edges in m [default: eval.bucket_edges = 5,10,15,20,25,30]
    #[arg(long, value_delimiter = ',')]
    pub bucket_edges: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::CapsMode;

/// Soft relevance scores: dataset construction, scorer training, evaluation,
/// and LLM benchmarking.
#[derive(Debug, Parser)]
#[command(name = "relscore", version)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for every random stage (default 3407).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Map labels, stratify, diffuse, split, and export a training dataset.
    BuildDataset(BuildDatasetArgs),
    /// Train a scorer on an exported dataset.
    Train(TrainArgs),
    /// Evaluate a trained scorer on a scored record file.
    Eval(EvalArgs),
    /// Query chat endpoints with a prompt set and score the responses.
    Bench(BenchArgs),
    /// Print fitted Beta parameters and the variance profile for a mapping.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct MappingArgs {
    /// Label-to-score table (TSV: label, score, optional count). Defaults to
    /// the bundled 18-category table.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiffusionArgs {
    /// Beta concentration alpha + beta.
    #[arg(long)]
    pub concentration: Option<f64>,
    /// Grid step for alpha and beta.
    #[arg(long)]
    pub increment: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Corpus file: one JSON object per line with `text`, `label`, optional `id`.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub mapping: MappingArgs,
    #[command(flatten)]
    pub diffusion: DiffusionArgs,
    /// Stratification interval width.
    #[arg(long)]
    pub interval_width: Option<f64>,
    /// Per-bucket caps: from the mapping's count column, or none.
    #[arg(long, value_enum)]
    pub caps: Option<CapsMode>,
    /// Split weights as `train,eval,test`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub split: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory produced by build-dataset.
    #[arg(long)]
    pub dataset: PathBuf,
    /// A: direct regression. B: classify then score.
    #[arg(long, default_value = "A")]
    pub variant: String,
    /// Model artifact path (default `<dataset>/model_<variant>.bin`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub mapping: MappingArgs,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub eval_interval: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Feature space size as a power of two.
    #[arg(long)]
    pub hash_bits: Option<u32>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Scored record file (for example `test.jsonl`).
    #[arg(long)]
    pub test: PathBuf,
    /// Comma-separated tolerances (default 0.1,0.2).
    #[arg(long, value_delimiter = ',')]
    pub tolerances: Option<Vec<f64>>,
    /// JSON report path (default `<model>.eval.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also evaluate the cosine-softmax baseline, with anchors from this file.
    #[arg(long)]
    pub baseline_train: Option<PathBuf>,
    #[arg(long)]
    pub relevant_label: Option<String>,
    #[arg(long)]
    pub other_label: Option<String>,
    /// Label shown in the printed table.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Endpoint file: one JSON object per line.
    #[arg(long)]
    pub endpoints: Option<PathBuf>,
    /// Prompt file (default: the bundled 50 sample prompts).
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    /// Response cache directory (default `<out>/cache`).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Maximum in-flight requests.
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// `population` or `sample`.
    #[arg(long)]
    pub variance: Option<String>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub mapping: MappingArgs,
    #[command(flatten)]
    pub diffusion: DiffusionArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

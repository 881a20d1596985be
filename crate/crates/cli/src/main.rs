//! `ironydet`: batch CLI for the irony detection pipeline.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{PartialConfig, RunConfig};

#[derive(Parser)]
#[command(
    name = "ironydet",
    version,
    about = "Irony detection for tweets: BiLSTM ensemble and TF-IDF/SVM baseline",
    after_help = "Every run writes run.json (the fully resolved configuration) to the \
                  output directory; pass it back via --config to replay the run."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean and tokenize a dataset into tokens.jsonl
    Prep(CommonArgs),
    /// Train the BiLSTM ensemble and report dev metrics
    Train(CommonArgs),
    /// Evaluate a trained ensemble on a labeled dataset
    Eval(CommonArgs),
    /// Write per-tweet ensemble predictions as predictions.jsonl
    Predict(CommonArgs),
    /// Train the 2x2 feature-ablation grid and report the table
    Ablate(CommonArgs),
    /// Train and evaluate the TF-IDF + linear SVM baseline
    Baseline(CommonArgs),
}

/// Flags shared by all subcommands. Unset flags fall back to the config file
/// (if given), then to the built-in defaults, which equal the best published
/// setting: 100d embeddings, 150 hidden units, dropout 0.1, learning rate
/// 1e-4, ensemble of 4.
#[derive(Args)]
struct CommonArgs {
    /// JSON config file; a run.json from a previous run replays it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Labeled dataset: one `id<TAB>label<TAB>text` line per tweet
    #[arg(long)]
    data: Option<PathBuf>,
    /// GloVe embeddings in the published text format
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Output directory for artifacts [default: runs/<command>]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output directory of a previous train run (eval/predict)
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Embedding width; must be one of 25, 50, 100
    #[arg(long)]
    dim: Option<usize>,
    /// LSTM hidden units per direction
    #[arg(long)]
    hidden: Option<usize>,
    /// Dropout probability on the sentence representation
    #[arg(long)]
    dropout: Option<f64>,
    /// Adam learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Number of ensemble members
    #[arg(long)]
    ensemble: Option<usize>,
    /// Base random seed (member i trains with seed + i)
    #[arg(long)]
    seed: Option<u64>,
    /// Feature groups to fuse: comma subset of {token,sentence}, or "none"
    #[arg(long)]
    features: Option<String>,
    /// How members vote: mean-prob or majority-vote
    #[arg(long)]
    combine: Option<String>,
    /// Train fraction of the train/dev split
    #[arg(long)]
    ratio: Option<f64>,
    /// Minimum corpus frequency for a token to enter the vocabulary
    #[arg(long)]
    min_freq: Option<u32>,
    /// Epochs without dev-F1 improvement before stopping
    #[arg(long)]
    patience: Option<u64>,
    /// Hard epoch cap
    #[arg(long)]
    max_epochs: Option<u64>,
    /// Examples per gradient step
    #[arg(long)]
    batch_size: Option<usize>,
    /// Keep the standalone word "not" (hashtag #not is always removed)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    keep_not: Option<bool>,
    /// Skip the first line of the dataset file
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    has_header: Option<bool>,
    /// Preserve the class balance in the train/dev split
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    stratify: Option<bool>,
    /// SVM regularization constant C (baseline)
    #[arg(long)]
    svm_c: Option<f64>,
    /// Stopword file, one lowercase word per line (baseline) [default: bundled list]
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

impl CommonArgs {
    /// The CLI flags as a config layer.
    fn to_layer(&self) -> Result<PartialConfig> {
        Ok(PartialConfig {
            command: None,
            data: self.data.clone(),
            embeddings: self.embeddings.clone(),
            out: self.out.clone(),
            checkpoint: self.checkpoint.clone(),
            dim: self.dim,
            hidden: self.hidden,
            dropout: self.dropout,
            lr: self.lr,
            ensemble: self.ensemble,
            seed: self.seed,
            features: self
                .features
                .as_deref()
                .map(ironydet_core::FeatureConfig::from_str)
                .transpose()
                .context("bad --features")?,
            combine: self
                .combine
                .as_deref()
                .map(ironydet_core::train::CombineRule::from_str)
                .transpose()
                .context("bad --combine")?,
            ratio: self.ratio,
            min_freq: self.min_freq,
            patience: self.patience,
            max_epochs: self.max_epochs,
            batch_size: self.batch_size,
            keep_not: self.keep_not,
            has_header: self.has_header,
            stratify: self.stratify,
            svm_c: self.svm_c,
            stopwords: self.stopwords.clone(),
        })
    }

    /// Resolves this invocation: defaults < checkpoint run.json (eval/predict)
    /// < --config file < CLI flags.
    fn resolve(&self, command: &str, use_checkpoint_config: bool) -> Result<RunConfig> {
        let mut layered = self.to_layer()?;
        if let Some(path) = &self.config {
            layered = layered.over(PartialConfig::from_file(path)?);
        }
        if use_checkpoint_config {
            if let Some(dir) = &layered.checkpoint {
                let run_json = dir.join("run.json");
                if run_json.is_file() {
                    let mut base = PartialConfig::from_file(&run_json)?;
                    // The training run's own paths must not leak into this run.
                    base.out = None;
                    base.checkpoint = None;
                    base.data = None;
                    layered = layered.over(base);
                }
            }
        }
        layered.resolve(command)
    }
}

fn real_main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Prep(args) => commands::prep(&args.resolve("prep", false)?),
        Command::Train(args) => commands::train(&args.resolve("train", false)?),
        Command::Eval(args) => commands::eval(&args.resolve("eval", true)?),
        Command::Predict(args) => commands::predict(&args.resolve("predict", true)?),
        Command::Ablate(args) => commands::ablate(&args.resolve("ablate", false)?),
        Command::Baseline(args) => commands::baseline(&args.resolve("baseline", false)?),
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

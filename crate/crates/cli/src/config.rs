//! Run configuration: defaults, config-file layer, CLI layer, and validation.
//!
//! Precedence is CLI flags > config file > defaults. The fully resolved
//! configuration is written to `run.json` in the output directory, and a
//! previous `run.json` can be passed back via `--config` to replay a run.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use ironydet_core::feats::FeatureConfig;
use ironydet_core::train::{CombineRule, TrainConfig};

/// Embedding widths the published GloVe Twitter files come in.
pub const ALLOWED_DIMS: [usize; 3] = [25, 50, 100];

/// Fully resolved configuration; one of these describes a run completely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Subcommand that produced this file (informational on replay).
    pub command: String,
    pub data: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub out: PathBuf,
    /// Directory of a previous `train` run (eval/predict only).
    pub checkpoint: Option<PathBuf>,
    pub dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub ensemble: usize,
    pub seed: u64,
    pub features: FeatureConfig,
    pub combine: CombineRule,
    pub ratio: f64,
    pub min_freq: u32,
    pub patience: u64,
    pub max_epochs: u64,
    pub batch_size: usize,
    pub keep_not: bool,
    pub has_header: bool,
    pub stratify: bool,
    pub svm_c: f64,
    pub stopwords: Option<PathBuf>,
}

/// One layer of configuration; unset fields defer to the layer below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartialConfig {
    pub command: Option<String>,
    pub data: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub dim: Option<usize>,
    pub hidden: Option<usize>,
    pub dropout: Option<f64>,
    pub lr: Option<f64>,
    pub ensemble: Option<usize>,
    pub seed: Option<u64>,
    pub features: Option<FeatureConfig>,
    pub combine: Option<CombineRule>,
    pub ratio: Option<f64>,
    pub min_freq: Option<u32>,
    pub patience: Option<u64>,
    pub max_epochs: Option<u64>,
    pub batch_size: Option<usize>,
    pub keep_not: Option<bool>,
    pub has_header: Option<bool>,
    pub stratify: Option<bool>,
    pub svm_c: Option<f64>,
    pub stopwords: Option<PathBuf>,
}

impl PartialConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing config file {}", path.display()))
    }

    /// Overlays `self` on top of `base`: set fields in `self` win.
    pub fn over(self, base: PartialConfig) -> PartialConfig {
        PartialConfig {
            command: self.command.or(base.command),
            data: self.data.or(base.data),
            embeddings: self.embeddings.or(base.embeddings),
            out: self.out.or(base.out),
            checkpoint: self.checkpoint.or(base.checkpoint),
            dim: self.dim.or(base.dim),
            hidden: self.hidden.or(base.hidden),
            dropout: self.dropout.or(base.dropout),
            lr: self.lr.or(base.lr),
            ensemble: self.ensemble.or(base.ensemble),
            seed: self.seed.or(base.seed),
            features: self.features.or(base.features),
            combine: self.combine.or(base.combine),
            ratio: self.ratio.or(base.ratio),
            min_freq: self.min_freq.or(base.min_freq),
            patience: self.patience.or(base.patience),
            max_epochs: self.max_epochs.or(base.max_epochs),
            batch_size: self.batch_size.or(base.batch_size),
            keep_not: self.keep_not.or(base.keep_not),
            has_header: self.has_header.or(base.has_header),
            stratify: self.stratify.or(base.stratify),
            svm_c: self.svm_c.or(base.svm_c),
            stopwords: self.stopwords.or(base.stopwords),
        }
    }

    /// Fills every remaining gap with the defaults (the best published
    /// setting: 100d embeddings, 150 hidden units, dropout 0.1, learning rate
    /// 1e-4, ensemble of 4) and validates the result.
    pub fn resolve(self, command: &str) -> Result<RunConfig> {
        let Some(data) = self.data else {
            bail!("no dataset given: pass --data or set \"data\" in the config file");
        };
        let cfg = RunConfig {
            command: command.to_string(),
            data,
            embeddings: self.embeddings,
            out: self
                .out
                .unwrap_or_else(|| PathBuf::from("runs").join(command)),
            checkpoint: self.checkpoint,
            dim: self.dim.unwrap_or(100),
            hidden: self.hidden.unwrap_or(150),
            dropout: self.dropout.unwrap_or(0.1),
            lr: self.lr.unwrap_or(1e-4),
            ensemble: self.ensemble.unwrap_or(4),
            seed: self.seed.unwrap_or(1),
            features: self.features.unwrap_or_default(),
            combine: self.combine.unwrap_or(CombineRule::MeanProb),
            ratio: self.ratio.unwrap_or(0.8),
            min_freq: self.min_freq.unwrap_or(1),
            patience: self.patience.unwrap_or(5),
            max_epochs: self.max_epochs.unwrap_or(100),
            batch_size: self.batch_size.unwrap_or(1),
            keep_not: self.keep_not.unwrap_or(false),
            has_header: self.has_header.unwrap_or(false),
            stratify: self.stratify.unwrap_or(false),
            svm_c: self.svm_c.unwrap_or(1.0),
            stopwords: self.stopwords,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if !ALLOWED_DIMS.contains(&self.dim) {
            bail!(
                "--dim {} is not a published embedding size (allowed: 25, 50, 100)",
                self.dim
            );
        }
        if !(self.dropout >= 0.0 && self.dropout < 1.0) {
            bail!("--dropout must be in [0, 1), got {}", self.dropout);
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            bail!("--lr must be a positive number, got {}", self.lr);
        }
        if self.ensemble == 0 {
            bail!("--ensemble must be at least 1");
        }
        if self.hidden == 0 {
            bail!("--hidden must be at least 1");
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            bail!(
                "--ratio must be strictly between 0 and 1, got {}",
                self.ratio
            );
        }
        if self.min_freq == 0 {
            bail!("--min-freq must be at least 1");
        }
        if self.batch_size == 0 {
            bail!("--batch-size must be at least 1");
        }
        if self.max_epochs == 0 {
            bail!("--max-epochs must be at least 1");
        }
        if !(self.svm_c > 0.0 && self.svm_c.is_finite()) {
            bail!("--svm-c must be a positive number, got {}", self.svm_c);
        }
        Ok(())
    }

    /// Checks that every input path the command will read exists, before any
    /// work starts.
    pub fn check_paths(&self, needs_embeddings: bool, needs_checkpoint: bool) -> Result<()> {
        if !self.data.is_file() {
            bail!("dataset not found: {}", self.data.display());
        }
        if needs_embeddings {
            match &self.embeddings {
                None => bail!("this command needs --embeddings (a GloVe text file)"),
                Some(p) if !p.is_file() => bail!("embeddings not found: {}", p.display()),
                Some(_) => {}
            }
        }
        if needs_checkpoint {
            match &self.checkpoint {
                None => bail!("this command needs --checkpoint (a train output directory)"),
                Some(p) if !p.join("run.json").is_file() => {
                    bail!("no run.json in checkpoint directory {}", p.display())
                }
                Some(p) => {
                    if p == &self.out {
                        bail!(
                            "--out must differ from --checkpoint (run.json would be overwritten)"
                        );
                    }
                }
            }
        }
        if let Some(p) = &self.stopwords {
            if !p.is_file() {
                bail!("stopword file not found: {}", p.display());
            }
        }
        Ok(())
    }

    /// The core training configuration this run describes.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            embed_dim: self.dim,
            hidden: self.hidden,
            dropout_p: self.dropout,
            lr: self.lr,
            features: self.features,
            seed: self.seed,
            ensemble_size: self.ensemble,
            batch_size: self.batch_size,
            patience: self.patience,
            max_epochs: self.max_epochs,
        }
    }

    pub fn prep_options(&self) -> ironydet_core::textprep::PrepOptions {
        ironydet_core::textprep::PrepOptions {
            remove_not: !self.keep_not,
        }
    }
}

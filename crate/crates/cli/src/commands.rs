//! Subcommand implementations and their artifact layout.
//!
//! Every command creates the output directory, runs its pipeline, and writes
//! `run.json` (the resolved [`RunConfig`]) next to its artifacts:
//!
//! * `prep`     → `tokens.jsonl`
//! * `train`    → `vocab.json`, `model_{i}.json`, `history.json`, `metrics.json`
//! * `eval`     → `metrics.json`
//! * `predict`  → `predictions.jsonl`
//! * `ablate`   → `ablation.json`, `ablation.txt`
//! * `baseline` → `metrics.json`

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use ironydet_core::baseline::{baseline_run, default_stopwords, load_stopwords};
use ironydet_core::corpus::{load_dataset, split_with_options, Split, Tweet};
use ironydet_core::embed::{build_vocab, load_glove, VocabArtifact, Vocabulary};
use ironydet_core::feats::EncodedExample;
use ironydet_core::neural::Checkpoint;
use ironydet_core::textprep::{prep_tweet, PrepRecord};
use ironydet_core::train::{
    ablate_with, ablation_table, encode_corpus, evaluate_ensemble, predict_batch, prep_corpus,
    train_ensemble, Ensemble, EpochStats, TrainConfig,
};

use crate::config::RunConfig;

/// Per-member training record stored in `history.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberHistory {
    pub member: usize,
    pub seed: u64,
    pub best_epoch: u64,
    pub epochs: Vec<EpochStats>,
}

/// One line of `predictions.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: u64,
    pub label: u8,
    pub prob: f64,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn prepare_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    write_json(&cfg.out, "run.json", cfg)
}

fn load_corpus(cfg: &RunConfig) -> Result<Vec<Tweet>> {
    let tweets = load_dataset(&cfg.data, cfg.has_header)
        .with_context(|| format!("loading {}", cfg.data.display()))?;
    log::info!("loaded {} tweets from {}", tweets.len(), cfg.data.display());
    Ok(tweets)
}

fn split_corpus(cfg: &RunConfig, tweets: &[Tweet]) -> Result<Split> {
    let s = split_with_options(tweets, cfg.ratio, cfg.seed, cfg.stratify)?;
    log::info!(
        "split {} tweets into {} train / {} dev (ratio {}, seed {})",
        tweets.len(),
        s.train.len(),
        s.dev.len(),
        cfg.ratio,
        cfg.seed
    );
    Ok(s)
}

/// Builds the vocabulary over the whole corpus (the OOV list depends on which
/// corpus tokens miss the embedding table) and encodes a subset of tweets.
fn build_vocabulary(cfg: &RunConfig, all_tweets: &[Tweet]) -> Result<Vocabulary> {
    let table = load_glove(cfg.embeddings.as_ref().expect("checked"), cfg.dim)?;
    log::info!("loaded {} embeddings of width {}", table.len(), table.dim());
    let seqs: Vec<_> = prep_corpus(all_tweets, &cfg.prep_options())
        .into_iter()
        .map(|(seq, _)| seq)
        .collect();
    let vocab = build_vocab(&seqs, table, cfg.min_freq, cfg.seed)?;
    log::info!(
        "vocabulary has {} out-of-vocabulary tokens",
        vocab.oov().len()
    );
    Ok(vocab)
}

fn encode_subset(
    cfg: &RunConfig,
    vocab: &Vocabulary,
    tweets: &[Tweet],
) -> Result<Vec<EncodedExample>> {
    let seqs = prep_corpus(tweets, &cfg.prep_options());
    let (encoded, dropped) = encode_corpus(&seqs, vocab, &cfg.features)?;
    if dropped > 0 {
        log::info!("dropped {dropped} tweets that cleaned down to nothing");
    }
    Ok(encoded)
}

pub fn prep(cfg: &RunConfig) -> Result<()> {
    cfg.check_paths(false, false)?;
    prepare_out(cfg)?;
    let tweets = load_corpus(cfg)?;
    let opts = cfg.prep_options();
    let path = cfg.out.join("tokens.jsonl");
    let mut file = fs::File::create(&path)?;
    for tweet in &tweets {
        let seq = prep_tweet(tweet, &opts);
        let record = PrepRecord {
            id: tweet.id,
            label: tweet.label,
            tokens: seq.tokens,
        };
        writeln!(file, "{}", serde_json::to_string(&record)?)?;
    }
    log::info!("wrote {}", path.display());
    println!(
        "prep: {} tweets tokenized into {}",
        tweets.len(),
        path.display()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    cfg.check_paths(true, false)?;
    prepare_out(cfg)?;
    let tweets = load_corpus(cfg)?;
    let s = split_corpus(cfg, &tweets)?;
    let vocab = build_vocabulary(cfg, &tweets)?;
    let train_x = encode_subset(cfg, &vocab, &s.train)?;
    let dev_x = encode_subset(cfg, &vocab, &s.dev)?;

    let (ensemble, outcomes) = train_ensemble(&cfg.train_config(), &train_x, &dev_x)?;
    let metrics = evaluate_ensemble(&ensemble, &dev_x)?;

    write_json(&cfg.out, "vocab.json", &vocab.to_artifact())?;
    for (i, member) in ensemble.members.iter().enumerate() {
        member.save(&cfg.out.join(format!("model_{i}.json")))?;
    }
    let history: Vec<MemberHistory> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| MemberHistory {
            member: i,
            seed: o.checkpoint.seed,
            best_epoch: o.best_epoch,
            epochs: o.history.clone(),
        })
        .collect();
    write_json(&cfg.out, "history.json", &history)?;
    write_json(&cfg.out, "metrics.json", &metrics)?;

    println!("train: {} members, dev metrics:", ensemble.members.len());
    println!("{metrics}");
    Ok(())
}

/// Reads a trained ensemble and its vocabulary back from a `train` directory.
fn load_ensemble(cfg: &RunConfig) -> Result<(Ensemble, Vocabulary)> {
    let dir = cfg.checkpoint.as_ref().expect("checked");
    let table = load_glove(cfg.embeddings.as_ref().expect("checked"), cfg.dim)?;
    let artifact: VocabArtifact =
        serde_json::from_str(&fs::read_to_string(dir.join("vocab.json"))?)
            .with_context(|| format!("parsing {}", dir.join("vocab.json").display()))?;
    let vocab = Vocabulary::from_artifact(table, artifact)?;

    let mut indexed = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy().into_owned();
        if let Some(idx) = name
            .strip_prefix("model_")
            .and_then(|s| s.strip_suffix(".json"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            indexed.push((idx, name));
        }
    }
    if indexed.is_empty() {
        bail!("no model_<i>.json checkpoints in {}", dir.display());
    }
    indexed.sort();
    let members = indexed
        .iter()
        .map(|(_, name)| Checkpoint::load(&dir.join(name)))
        .collect::<ironydet_core::Result<Vec<_>>>()?;
    log::info!(
        "loaded {} checkpoints from {}",
        members.len(),
        dir.display()
    );
    Ok((Ensemble::new(members, cfg.combine)?, vocab))
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    cfg.check_paths(true, true)?;
    prepare_out(cfg)?;
    let tweets = load_corpus(cfg)?;
    let (ensemble, vocab) = load_ensemble(cfg)?;
    let encoded = encode_subset(cfg, &vocab, &tweets)?;
    let metrics = evaluate_ensemble(&ensemble, &encoded)?;
    write_json(&cfg.out, "metrics.json", &metrics)?;
    println!("eval: {} tweets", encoded.len());
    println!("{metrics}");
    Ok(())
}

pub fn predict(cfg: &RunConfig) -> Result<()> {
    cfg.check_paths(true, true)?;
    prepare_out(cfg)?;
    let tweets = load_corpus(cfg)?;
    let (ensemble, vocab) = load_ensemble(cfg)?;
    let encoded = encode_subset(cfg, &vocab, &tweets)?;
    let predictions = predict_batch(&ensemble, &encoded)?;

    let path = cfg.out.join("predictions.jsonl");
    let mut file = fs::File::create(&path)?;
    for (example, (label, prob)) in encoded.iter().zip(&predictions) {
        let record = PredictionRecord {
            id: example.source_id,
            label: *label,
            prob: *prob,
        };
        writeln!(file, "{}", serde_json::to_string(&record)?)?;
    }
    log::info!("wrote {}", path.display());
    println!(
        "predict: {} predictions into {}",
        predictions.len(),
        path.display()
    );
    Ok(())
}

pub fn ablate(cfg: &RunConfig) -> Result<()> {
    cfg.check_paths(true, false)?;
    prepare_out(cfg)?;
    let tweets = load_corpus(cfg)?;
    let s = split_corpus(cfg, &tweets)?;
    let vocab = build_vocabulary(cfg, &tweets)?;

    let train_seqs = prep_corpus(&s.train, &cfg.prep_options());
    let dev_seqs = prep_corpus(&s.dev, &cfg.prep_options());
    let report = ablate_with(|features| {
        log::info!(
            "ablation cell: token={} sentence={}",
            features.use_token_feats,
            features.use_sentence_feats
        );
        let (train_x, _) = encode_corpus(&train_seqs, &vocab, &features)?;
        let (dev_x, _) = encode_corpus(&dev_seqs, &vocab, &features)?;
        let cell_cfg = TrainConfig {
            features,
            ..cfg.train_config()
        };
        let (ensemble, _) = train_ensemble(&cell_cfg, &train_x, &dev_x)?;
        evaluate_ensemble(&ensemble, &dev_x)
    })?;

    let table = ablation_table(&report);
    write_json(&cfg.out, "ablation.json", &report)?;
    let txt_path = cfg.out.join("ablation.txt");
    fs::write(&txt_path, format!("{table}\n"))?;
    log::info!("wrote {}", txt_path.display());
    println!("{table}");
    Ok(())
}

pub fn baseline(cfg: &RunConfig) -> Result<()> {
    cfg.check_paths(false, false)?;
    prepare_out(cfg)?;
    let tweets = load_corpus(cfg)?;
    let s = split_corpus(cfg, &tweets)?;
    let stopwords = match &cfg.stopwords {
        Some(path) => load_stopwords(path)?,
        None => default_stopwords(),
    };
    let metrics = baseline_run(&s.train, &s.dev, cfg.svm_c, &stopwords, &cfg.prep_options())?;
    write_json(&cfg.out, "metrics.json", &metrics)?;
    println!("baseline: C = {}, dev metrics:", cfg.svm_c);
    println!("{metrics}");
    Ok(())
}

//! Training orchestration: single-model training with early stopping, the
//! seed-varied ensemble, prediction, and the feature-ablation experiment.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Tweet;
use crate::embed::Vocabulary;
use crate::error::{Error, Result};
use crate::feats::{encode, EncodedExample, FeatureConfig};
use crate::metrics::MetricsReport;
use crate::neural::{backward, predict_prob, Checkpoint, DropoutMask, Gradients, ModelParams};
use crate::optim::{adam_step, AdamHyper, AdamState, EarlyStopping};
use crate::seeds::{derive_seed_n, DOMAIN_DROPOUT, DOMAIN_SHUFFLE};
use crate::textprep::{prep_tweet, PrepOptions, TokenSeq};

/// Hyperparameters for one training run. Defaults are the best reported
/// configuration: 100-dim embeddings, 150 hidden units, dropout 0.1,
/// learning rate 1e-4, ensemble of 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub dropout_p: f64,
    pub lr: f64,
    pub features: FeatureConfig,
    pub seed: u64,
    pub ensemble_size: usize,
    pub batch_size: usize,
    pub patience: u64,
    pub max_epochs: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            embed_dim: 100,
            hidden: 150,
            dropout_p: 0.1,
            lr: 1e-4,
            features: FeatureConfig::default(),
            seed: 1,
            ensemble_size: 4,
            batch_size: 1,
            patience: 5,
            max_epochs: 100,
        }
    }
}

/// How ensemble member outputs are combined into one decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombineRule {
    /// Mean of the member sigmoid probabilities, thresholded at 0.5.
    MeanProb,
    /// Each member votes with its own 0.5 threshold; ties go positive.
    MajorityVote,
}

impl FromStr for CombineRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" | "mean-prob" => Ok(Self::MeanProb),
            "vote" | "majority-vote" => Ok(Self::MajorityVote),
            other => Err(Error::InvalidArgument(format!(
                "unknown combine rule {other:?} (expected mean-prob or majority-vote)"
            ))),
        }
    }
}

/// Dev metrics recorded after each training epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u64,
    pub train_loss: f64,
    pub dev: MetricsReport,
}

/// Everything produced by one [`train_model`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters restored from the best dev-F1 epoch.
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochStats>,
    pub best_epoch: u64,
    /// Source ids of every example a backward pass ran on.
    pub trained_ids: BTreeSet<u64>,
    pub backward_calls: u64,
}

fn check_widths(cfg: &TrainConfig, sets: &[&[EncodedExample]]) -> Result<usize> {
    let width = cfg.features.fused_width(cfg.embed_dim);
    for set in sets {
        for ex in *set {
            if let Some(row) = ex.x.first() {
                if row.len() != width {
                    return Err(Error::Shape(format!(
                        "example {} has row width {} but the config implies {width}",
                        ex.source_id,
                        row.len()
                    )));
                }
            }
        }
    }
    Ok(width)
}

/// Trains one model: per epoch a seed-derived shuffle, one
/// forward/backward/Adam step per batch, dev evaluation, early stopping on
/// dev F1, best-epoch checkpoint restoration.
pub fn train_model(
    cfg: &TrainConfig,
    train: &[EncodedExample],
    dev: &[EncodedExample],
    seed: u64,
) -> Result<TrainOutcome> {
    if train.is_empty() || dev.is_empty() {
        return Err(Error::InvalidArgument(
            "train and dev sets must be non-empty".into(),
        ));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be ≥ 1".into()));
    }
    let width = check_widths(cfg, &[train, dev])?;

    let mut params = ModelParams::init(
        width,
        cfg.hidden,
        cfg.dropout_p,
        &mut ChaCha8Rng::seed_from_u64(seed),
    );
    params.validate()?;
    let mut adam = AdamState::new(&params, AdamHyper::with_lr(cfg.lr));
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed_n(seed, DOMAIN_DROPOUT, 0));

    let mut best = params.clone();
    let mut history = Vec::new();
    let mut trained_ids = BTreeSet::new();
    let mut backward_calls = 0u64;

    for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed_n(
            seed,
            DOMAIN_SHUFFLE,
            epoch,
        )));

        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = Gradients::zeros_like(&params);
            for &idx in batch {
                let ex = &train[idx];
                let mask = DropoutMask::sample(2 * cfg.hidden, cfg.dropout_p, &mut dropout_rng);
                let (loss, grads) = backward(&params, &ex.x, ex.y, &mask)?;
                loss_sum += loss;
                acc.add_assign(&grads);
                trained_ids.insert(ex.source_id);
                backward_calls += 1;
            }
            if batch.len() > 1 {
                acc.scale(1.0 / batch.len() as f64);
            }
            adam_step(&mut adam, &mut params, &acc)?;
        }

        let dev_metrics = evaluate_model(&params, dev)?;
        let outcome = stopper.update(epoch, dev_metrics.f1);
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            dev: dev_metrics,
        });
        if outcome.improved {
            best = params.clone();
        }
        if outcome.stop {
            break;
        }
    }

    Ok(TrainOutcome {
        checkpoint: Checkpoint { seed, params: best },
        history,
        best_epoch: stopper.best_epoch(),
        trained_ids,
        backward_calls,
    })
}

/// Eval-mode metrics of a single model over a labeled set (threshold 0.5,
/// ties positive).
pub fn evaluate_model(params: &ModelParams, examples: &[EncodedExample]) -> Result<MetricsReport> {
    let mut preds = Vec::with_capacity(examples.len());
    let mut golds = Vec::with_capacity(examples.len());
    for ex in examples {
        let p = predict_prob(params, &ex.x)?;
        preds.push(u8::from(p >= 0.5));
        golds.push(ex.y);
    }
    MetricsReport::from_predictions(&preds, &golds)
}

/// A trained ensemble: same architecture, different initialization seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub members: Vec<Checkpoint>,
    pub combine: CombineRule,
    pub threshold: f64,
}

impl Ensemble {
    pub fn new(members: Vec<Checkpoint>, combine: CombineRule) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument(
                "an ensemble needs at least one member".into(),
            ));
        }
        let (k, h) = (members[0].params.input_dim, members[0].params.hidden_dim);
        for m in &members {
            m.params.validate()?;
            if m.params.input_dim != k || m.params.hidden_dim != h {
                return Err(Error::Shape(
                    "ensemble members must share one architecture".into(),
                ));
            }
        }
        Ok(Self {
            members,
            combine,
            threshold: 0.5,
        })
    }
}

/// Combines member probabilities into a (label, mean probability) pair.
///
/// The mean is computed over a `total_cmp`-sorted copy so the result is
/// bit-identical under any permutation of the members.
pub fn combine_probabilities(probs: &[f64], rule: CombineRule, threshold: f64) -> (u8, f64) {
    let mut sorted = probs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let label = match rule {
        CombineRule::MeanProb => u8::from(mean >= threshold),
        CombineRule::MajorityVote => {
            let votes = probs.iter().filter(|&&p| p >= threshold).count();
            u8::from(2 * votes >= probs.len())
        }
    };
    (label, mean)
}

/// Ensemble prediction for one example.
pub fn predict(ens: &Ensemble, example: &EncodedExample) -> Result<(u8, f64)> {
    let probs = ens
        .members
        .iter()
        .map(|m| predict_prob(&m.params, &example.x))
        .collect::<Result<Vec<f64>>>()?;
    Ok(combine_probabilities(&probs, ens.combine, ens.threshold))
}

/// Ensemble predictions over a whole set (parallel over examples, order
/// preserved, bit-deterministic).
pub fn predict_batch(ens: &Ensemble, examples: &[EncodedExample]) -> Result<Vec<(u8, f64)>> {
    examples.par_iter().map(|ex| predict(ens, ex)).collect()
}

/// Ensemble metrics over a labeled set.
pub fn evaluate_ensemble(ens: &Ensemble, examples: &[EncodedExample]) -> Result<MetricsReport> {
    let labeled = predict_batch(ens, examples)?;
    let preds: Vec<u8> = labeled.iter().map(|(l, _)| *l).collect();
    let golds: Vec<u8> = examples.iter().map(|ex| ex.y).collect();
    MetricsReport::from_predictions(&preds, &golds)
}

/// Trains `cfg.ensemble_size` members in parallel; member `i` uses seed
/// `cfg.seed + i`. Results are independent of thread scheduling.
pub fn train_ensemble(
    cfg: &TrainConfig,
    train: &[EncodedExample],
    dev: &[EncodedExample],
) -> Result<(Ensemble, Vec<TrainOutcome>)> {
    if cfg.ensemble_size == 0 {
        return Err(Error::InvalidArgument("ensemble_size must be ≥ 1".into()));
    }
    let outcomes: Vec<TrainOutcome> = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|i| train_model(cfg, train, dev, cfg.seed + i as u64))
        .collect::<Result<_>>()?;
    let members = outcomes.iter().map(|o| o.checkpoint.clone()).collect();
    Ok((Ensemble::new(members, CombineRule::MeanProb)?, outcomes))
}

/// Cleans and tokenizes a corpus, keeping labels alongside the token
/// sequences.
pub fn prep_corpus(tweets: &[Tweet], opts: &PrepOptions) -> Vec<(TokenSeq, u8)> {
    tweets
        .iter()
        .map(|t| (prep_tweet(t, opts), t.label))
        .collect()
}

/// Encodes a prepped corpus, dropping tweets that became empty. Returns the
/// encoded examples and the dropped count.
pub fn encode_corpus(
    seqs: &[(TokenSeq, u8)],
    vocab: &Vocabulary,
    feats: &FeatureConfig,
) -> Result<(Vec<EncodedExample>, usize)> {
    let mut encoded = Vec::with_capacity(seqs.len());
    let mut dropped = 0usize;
    for (seq, label) in seqs {
        if seq.tokens.is_empty() {
            dropped += 1;
            continue;
        }
        encoded.push(encode(seq, *label, vocab, feats)?);
    }
    if dropped > 0 {
        log::info!("dropped {dropped} tweets that were empty after preprocessing");
    }
    Ok((encoded, dropped))
}

/// One cell of the feature-ablation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub token_feats: bool,
    pub sentence_feats: bool,
    pub dev: MetricsReport,
}

/// The 2×2 feature grid plus the per-group yes/no dev F1 rows (the other
/// group held at its default, on).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub cells: Vec<AblationCell>,
    pub token_yes_f1: f64,
    pub token_no_f1: f64,
    pub sentence_yes_f1: f64,
    pub sentence_no_f1: f64,
}

/// Runs the ablation grid through `runner`, which trains and evaluates one
/// configuration (injected so the grid logic is testable without training).
pub fn ablate_with<F>(mut runner: F) -> Result<AblationReport>
where
    F: FnMut(FeatureConfig) -> Result<MetricsReport>,
{
    let grid = [(true, true), (true, false), (false, true), (false, false)];
    let mut cells = Vec::with_capacity(4);
    for (token_feats, sentence_feats) in grid {
        let dev = runner(FeatureConfig {
            use_token_feats: token_feats,
            use_sentence_feats: sentence_feats,
        })?;
        cells.push(AblationCell {
            token_feats,
            sentence_feats,
            dev,
        });
    }
    let f1 = |tok: bool, sent: bool| {
        cells
            .iter()
            .find(|c| c.token_feats == tok && c.sentence_feats == sent)
            .expect("full grid")
            .dev
            .f1
    };
    Ok(AblationReport {
        token_yes_f1: f1(true, true),
        token_no_f1: f1(false, true),
        sentence_yes_f1: f1(true, true),
        sentence_no_f1: f1(true, false),
        cells,
    })
}

/// Plain-text rendering of the ablation rows, one feature group per line.
pub fn ablation_table(report: &AblationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<16} {:>8} {:>8}\n", "Feature", "yes", "no"));
    out.push_str(&format!(
        "{:<16} {:>8.4} {:>8.4}\n",
        "Token-level", report.token_yes_f1, report.token_no_f1
    ));
    out.push_str(&format!(
        "{:<16} {:>8.4} {:>8.4}\n",
        "Sentence-level", report.sentence_yes_f1, report.sentence_no_f1
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Linearly separable toy data: class-1 tokens cluster at +μ, class-0 at
    /// −μ, with small per-token noise.
    fn synthetic_set(n: usize, k: usize, seed: u64) -> Vec<EncodedExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let y = (i % 2) as u8;
                let mu = if y == 1 { 0.8 } else { -0.8 };
                let l = 3 + i % 3;
                EncodedExample {
                    x: (0..l)
                        .map(|_| (0..k).map(|_| mu + rng.random_range(-0.2..0.2)).collect())
                        .collect(),
                    y,
                    source_id: i as u64,
                }
            })
            .collect()
    }

    fn toy_cfg(k: usize) -> TrainConfig {
        TrainConfig {
            embed_dim: k,
            hidden: 8,
            dropout_p: 0.0,
            lr: 0.01,
            features: "none".parse().unwrap(),
            seed: 3,
            ensemble_size: 1,
            batch_size: 1,
            patience: 200,
            max_epochs: 200,
        }
    }

    #[test]
    fn overfits_a_separable_toy_set() {
        let data = synthetic_set(20, 4, 0);
        let cfg = toy_cfg(4);
        let out = train_model(&cfg, &data, &data, cfg.seed).unwrap();
        let train_metrics = evaluate_model(&out.checkpoint.params, &data).unwrap();
        assert_eq!(
            train_metrics.accuracy,
            1.0,
            "history: {:?}",
            out.history.len()
        );
        // Dev = train here, so the best recorded dev F1 must also be perfect.
        let best_f1 = out.history.iter().map(|e| e.dev.f1).fold(0.0, f64::max);
        assert_eq!(best_f1, 1.0);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let data = synthetic_set(10, 3, 5);
        let mut cfg = toy_cfg(3);
        cfg.max_epochs = 5;
        cfg.patience = 5;
        let a = train_model(&cfg, &data, &data, 42).unwrap();
        let b = train_model(&cfg, &data, &data, 42).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.checkpoint, b.checkpoint);
    }

    #[test]
    fn dev_set_never_receives_backward_passes() {
        let train: Vec<_> = synthetic_set(12, 3, 1);
        let mut dev = synthetic_set(6, 3, 2);
        for (i, ex) in dev.iter_mut().enumerate() {
            ex.source_id = 1000 + i as u64;
        }
        let mut cfg = toy_cfg(3);
        cfg.max_epochs = 3;
        let out = train_model(&cfg, &train, &dev, 7).unwrap();
        assert_eq!(out.backward_calls, 3 * 12);
        for ex in &dev {
            assert!(
                !out.trained_ids.contains(&ex.source_id),
                "dev example {} was trained on",
                ex.source_id
            );
        }
    }

    #[test]
    fn history_respects_max_epochs_and_best_epoch() {
        let data = synthetic_set(10, 3, 9);
        let mut cfg = toy_cfg(3);
        cfg.max_epochs = 8;
        cfg.patience = 3;
        let out = train_model(&cfg, &data, &data, 11).unwrap();
        assert!(out.history.len() <= 8);
        let best_in_history = out
            .history
            .iter()
            .map(|e| e.dev.f1)
            .fold(f64::NEG_INFINITY, f64::max);
        let best_epoch_f1 = out
            .history
            .iter()
            .find(|e| e.epoch == out.best_epoch)
            .unwrap()
            .dev
            .f1;
        assert_eq!(best_epoch_f1, best_in_history);
    }

    #[test]
    fn batch_accumulation_averages_gradients() {
        // batch_size = n collapses each epoch into a single Adam step; the
        // run must still learn the separable set.
        let data = synthetic_set(8, 3, 13);
        let mut cfg = toy_cfg(3);
        cfg.batch_size = 8;
        cfg.lr = 0.05;
        let out = train_model(&cfg, &data, &data, 5).unwrap();
        let acc = evaluate_model(&out.checkpoint.params, &data)
            .unwrap()
            .accuracy;
        assert_eq!(acc, 1.0, "accuracy {acc}");
    }

    #[test]
    fn ensemble_has_distinct_seeds_and_architecture() {
        let data = synthetic_set(8, 3, 3);
        let mut cfg = toy_cfg(3);
        cfg.ensemble_size = 4;
        cfg.max_epochs = 2;
        let (ens, outcomes) = train_ensemble(&cfg, &data, &data).unwrap();
        assert_eq!(ens.members.len(), 4);
        let seeds: BTreeSet<u64> = ens.members.iter().map(|m| m.seed).collect();
        assert_eq!(seeds.len(), 4);
        assert_eq!(outcomes.len(), 4);
        // Different seeds → different parameters.
        assert_ne!(ens.members[0].params, ens.members[1].params);
    }

    #[test]
    fn singleton_ensemble_equals_its_member() {
        let data = synthetic_set(8, 3, 4);
        let mut cfg = toy_cfg(3);
        cfg.max_epochs = 2;
        let (ens, _) = train_ensemble(&cfg, &data, &data).unwrap();
        for ex in &data {
            let (_, p_ens) = predict(&ens, ex).unwrap();
            let p_single = predict_prob(&ens.members[0].params, &ex.x).unwrap();
            assert_eq!(p_ens, p_single);
        }
    }

    #[test]
    fn identical_members_average_to_their_probability() {
        let data = synthetic_set(6, 3, 6);
        let mut cfg = toy_cfg(3);
        cfg.max_epochs = 2;
        let out = train_model(&cfg, &data, &data, 9).unwrap();
        let ens = Ensemble::new(
            vec![
                out.checkpoint.clone(),
                out.checkpoint.clone(),
                out.checkpoint.clone(),
            ],
            CombineRule::MeanProb,
        )
        .unwrap();
        for ex in &data {
            let (_, p_ens) = predict(&ens, ex).unwrap();
            let p_one = predict_prob(&out.checkpoint.params, &ex.x).unwrap();
            assert!((p_ens - p_one).abs() < 1e-15);
        }
    }

    #[test]
    fn combination_rule_reference_cases() {
        let (label, p) = combine_probabilities(&[0.9, 0.8, 0.6, 0.7], CombineRule::MeanProb, 0.5);
        assert_eq!(label, 1);
        assert!((p - 0.75).abs() < 1e-12);
        let (label, p) = combine_probabilities(&[0.1, 0.2, 0.3, 0.4], CombineRule::MeanProb, 0.5);
        assert_eq!(label, 0);
        assert!((p - 0.25).abs() < 1e-12);
        // Exact ties go positive.
        let (label, p) = combine_probabilities(&[0.5, 0.5, 0.5, 0.5], CombineRule::MeanProb, 0.5);
        assert_eq!((label, p), (1, 0.5));
    }

    #[test]
    fn majority_vote_counts_members_not_mass() {
        // Two confident negatives vs three weak positives.
        let probs = [0.51, 0.52, 0.53, 0.01, 0.02];
        let (label, _) = combine_probabilities(&probs, CombineRule::MajorityVote, 0.5);
        assert_eq!(label, 1);
        let (label, _) = combine_probabilities(&probs, CombineRule::MeanProb, 0.5);
        assert_eq!(label, 0);
        // 2-2 vote ties go positive.
        let (label, _) =
            combine_probabilities(&[0.9, 0.9, 0.1, 0.1], CombineRule::MajorityVote, 0.5);
        assert_eq!(label, 1);
    }

    #[test]
    fn mean_probability_is_permutation_invariant() {
        let probs = [0.123456789, 0.987654321, 0.5, 0.333333333, 0.1 + 0.2];
        let (_, base) = combine_probabilities(&probs, CombineRule::MeanProb, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut shuffled = probs.to_vec();
        for _ in 0..20 {
            shuffled.shuffle(&mut rng);
            let (_, p) = combine_probabilities(&shuffled, CombineRule::MeanProb, 0.5);
            assert_eq!(p.to_bits(), base.to_bits());
        }
    }

    #[test]
    fn ablation_grid_with_stub_runner() {
        let stub = MetricsReport::from_counts(3, 1, 1, 3);
        let report = ablate_with(|_| Ok(stub.clone())).unwrap();
        assert_eq!(report.cells.len(), 4);
        assert!(report.cells.iter().all(|c| c.dev == stub));
        assert_eq!(report.token_yes_f1, report.token_no_f1);
        assert_eq!(report.sentence_yes_f1, report.sentence_no_f1);

        let table = ablation_table(&report);
        assert!(table.contains("Token-level"));
        assert!(table.contains("Sentence-level"));
        assert!(table.lines().next().unwrap().contains("yes"));
        assert_eq!(table.lines().count(), 3);
    }

    #[test]
    fn ablation_runner_sees_all_four_configs() {
        let mut seen = Vec::new();
        ablate_with(|cfg| {
            seen.push((cfg.use_token_feats, cfg.use_sentence_feats));
            Ok(MetricsReport::from_counts(1, 0, 0, 1))
        })
        .unwrap();
        seen.sort();
        assert_eq!(
            seen,
            [(false, false), (false, true), (true, false), (true, true)]
        );
    }

    #[test]
    fn encode_corpus_drops_empty_tweets() {
        use crate::embed::{build_vocab, parse_glove};
        use std::io::Cursor;
        let glove: String = (0..10).map(|i| format!("tok{i} 1 1\n")).collect();
        let table = parse_glove(Cursor::new(glove.as_bytes()), 2).unwrap();
        let vocab = build_vocab(&[], table, 2, 0).unwrap();
        let seqs = vec![
            (
                TokenSeq {
                    tokens: vec!["tok1".into()],
                    source_id: 1,
                },
                1,
            ),
            (
                TokenSeq {
                    tokens: vec![],
                    source_id: 2,
                },
                0,
            ),
        ];
        let cfg = "none".parse().unwrap();
        let (encoded, dropped) = encode_corpus(&seqs, &vocab, &cfg).unwrap();
        assert_eq!(encoded.len(), 1);
        assert_eq!(dropped, 1);
        assert_eq!(encoded[0].source_id, 1);
    }

    #[test]
    fn mismatched_width_is_rejected_before_training() {
        let mut data = synthetic_set(4, 3, 0);
        data[0].x[0].push(9.0);
        let cfg = toy_cfg(3);
        assert!(train_model(&cfg, &data, &data, 0).is_err());
    }
}

//! The comparison system: TF-IDF bag-of-words features with a linear SVM,
//! over lowercased, stopword-filtered text.
//!
//! The TF-IDF variant is pinned: raw term counts, smoothed idf
//! `ln((1+N)/(1+df)) + 1`, per-document L2 normalization. The SVM is trained
//! by sequential minimal optimization on the dual with maximal-violating-pair
//! working-set selection; correctness is defined by the primal objective, not
//! the algorithm.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Tweet;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::textprep::{preprocess_with, tokenize_text, PrepOptions};

/// The bundled list of 179 English stopwords (one per line, lowercase).
pub fn default_stopwords() -> BTreeSet<String> {
    include_str!("../data/stopwords_en.txt")
        .lines()
        .map(str::to_string)
        .collect()
}

/// Loads a stopword list in the same one-word-per-line format.
pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Term vocabulary (first-occurrence order) with fitted idf weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVocab {
    terms: Vec<String>,
    index: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

/// One document as a sparse L2-normalized TF-IDF vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseDoc {
    /// (term index, weight), strictly increasing in index.
    pub entries: Vec<(usize, f64)>,
    /// Width of the dense space (vocabulary size).
    pub dim: usize,
}

impl SparseDoc {
    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    fn dot_dense(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| w[i] * v).sum()
    }

    fn dot_sparse(&self, other: &SparseDoc) -> f64 {
        let (mut a, mut b) = (
            self.entries.iter().peekable(),
            other.entries.iter().peekable(),
        );
        let mut sum = 0.0;
        while let (Some(&&(ia, va)), Some(&&(ib, vb))) = (a.peek(), b.peek()) {
            match ia.cmp(&ib) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += va * vb;
                    a.next();
                    b.next();
                }
            }
        }
        sum
    }

    /// dense += s · self.
    fn add_into(&self, dense: &mut [f64], s: f64) {
        for &(i, v) in &self.entries {
            dense[i] += s * v;
        }
    }
}

impl TfidfVocab {
    /// Fits vocabulary and idf on the training documents.
    pub fn fit(docs: &[Vec<String>]) -> Self {
        let mut terms: Vec<String> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut df: Vec<u64> = Vec::new();
        for doc in docs {
            let mut seen: BTreeSet<usize> = BTreeSet::new();
            for tok in doc {
                let idx = *index.entry(tok.clone()).or_insert_with(|| {
                    terms.push(tok.clone());
                    df.push(0);
                    terms.len() - 1
                });
                seen.insert(idx);
            }
            for idx in seen {
                df[idx] += 1;
            }
        }
        let n = docs.len() as f64;
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Self { terms, index, idf }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index.get(term).map(|&i| self.idf[i])
    }

    /// Maps a document to its normalized TF-IDF vector; unseen terms are
    /// ignored, and an all-unseen (or empty) document becomes the zero vector.
    pub fn transform(&self, doc: &[String]) -> SparseDoc {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for tok in doc {
            if let Some(&idx) = self.index.get(tok) {
                *counts.entry(idx).or_insert(0.0) += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(idx, tf)| (idx, tf * self.idf[idx]))
            .collect();
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut entries {
                *w /= norm;
            }
        }
        SparseDoc {
            entries,
            dim: self.terms.len(),
        }
    }
}

/// Fits on `docs` and transforms them in one pass.
pub fn tfidf_fit_transform(docs: &[Vec<String>]) -> (TfidfVocab, Vec<SparseDoc>) {
    let vocab = TfidfVocab::fit(docs);
    let transformed = docs.iter().map(|d| vocab.transform(d)).collect();
    (vocab, transformed)
}

/// Trained linear SVM: decision = w·x + b, label 1 iff decision ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub c: f64,
}

impl LinearSvmModel {
    pub fn decision(&self, x: &SparseDoc) -> f64 {
        x.dot_dense(&self.w) + self.b
    }

    pub fn predict(&self, x: &SparseDoc) -> u8 {
        u8::from(self.decision(x) >= 0.0)
    }
}

/// Primal objective (1/2)‖w‖² + C·Σ hinge(yᵢ(w·xᵢ+b)); the bias is not
/// regularized.
pub fn svm_objective(w: &[f64], b: f64, xs: &[SparseDoc], y: &[u8], c: f64) -> f64 {
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = xs
        .iter()
        .zip(y)
        .map(|(x, &label)| {
            let sy = if label == 1 { 1.0 } else { -1.0 };
            (1.0 - sy * (x.dot_dense(w) + b)).max(0.0)
        })
        .sum();
    reg + c * hinge
}

const SMO_TOL: f64 = 1e-8;
const SMO_MAX_ITER: usize = 500_000;

/// Trains the SVM by SMO on the dual with maximal-violating-pair selection,
/// keeping the dense weight vector updated incrementally. Stops when the KKT
/// violation m − M drops below 1e-8.
pub fn svm_train(xs: &[SparseDoc], y: &[u8], c: f64) -> Result<LinearSvmModel> {
    if xs.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} documents but {} labels",
            xs.len(),
            y.len()
        )));
    }
    if c <= 0.0 {
        return Err(Error::InvalidArgument(format!("C must be > 0, got {c}")));
    }
    if !y.contains(&1) || !y.contains(&0) {
        return Err(Error::SingleClass);
    }
    let n = xs.len();
    let dim = xs[0].dim;
    for x in xs {
        if x.dim != dim {
            return Err(Error::Shape("documents disagree on vocabulary size".into()));
        }
    }
    let sy: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let self_dot: Vec<f64> = xs.iter().map(|x| x.dot_sparse(x)).collect();

    let mut alpha = vec![0.0f64; n];
    let mut w = vec![0.0f64; dim];
    let mut last_m = 0.0;
    let mut last_big_m = 0.0;

    for iter in 0..SMO_MAX_ITER {
        // s_t = y_t − w·x_t is the KKT score −y_t·∇f_t of the dual.
        let mut best_i: Option<(usize, f64)> = None;
        let mut best_j: Option<(usize, f64)> = None;
        for t in 0..n {
            let s_t = sy[t] - xs[t].dot_dense(&w);
            let in_up = (sy[t] > 0.0 && alpha[t] < c) || (sy[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (sy[t] < 0.0 && alpha[t] < c) || (sy[t] > 0.0 && alpha[t] > 0.0);
            if in_up && best_i.is_none_or(|(_, s)| s_t > s) {
                best_i = Some((t, s_t));
            }
            if in_low && best_j.is_none_or(|(_, s)| s_t < s) {
                best_j = Some((t, s_t));
            }
        }
        let (Some((i, m)), Some((j, big_m))) = (best_i, best_j) else {
            break; // no feasible direction remains
        };
        last_m = m;
        last_big_m = big_m;
        if m - big_m <= SMO_TOL {
            break;
        }
        if iter + 1 == SMO_MAX_ITER {
            log::warn!("SMO hit the iteration cap with violation {:.3e}", m - big_m);
        }

        // Step δ along (α_i += y_i δ, α_j −= y_j δ); η is ‖x_i − x_j‖².
        let eta = self_dot[i] + self_dot[j] - 2.0 * xs[i].dot_sparse(&xs[j]);
        let mut delta = if eta > 1e-12 {
            (m - big_m) / eta
        } else {
            f64::INFINITY
        };
        let room_i = if sy[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let room_j = if sy[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        delta = delta.min(room_i).min(room_j);

        alpha[i] = (alpha[i] + sy[i] * delta).clamp(0.0, c);
        alpha[j] = (alpha[j] - sy[j] * delta).clamp(0.0, c);
        xs[i].add_into(&mut w, delta);
        xs[j].add_into(&mut w, -delta);
    }

    // Bias: average y_t − w·x_t over free support vectors, else the midpoint
    // of the final KKT bracket.
    let free_eps = 1e-8 * c;
    let mut b_sum = 0.0;
    let mut b_count = 0usize;
    for t in 0..n {
        if alpha[t] > free_eps && alpha[t] < c - free_eps {
            b_sum += sy[t] - xs[t].dot_dense(&w);
            b_count += 1;
        }
    }
    let b = if b_count > 0 {
        b_sum / b_count as f64
    } else {
        0.5 * (last_m + last_big_m)
    };

    let model = LinearSvmModel { w, b, c };
    if !model.b.is_finite() || model.w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svm weights".into()));
    }
    Ok(model)
}

/// Lowercases, tokenizes and stopword-filters one tweet for the baseline
/// (after the shared trigger/mention/URL cleaning).
pub fn baseline_tokens(raw: &str, stopwords: &BTreeSet<String>, opts: &PrepOptions) -> Vec<String> {
    let cleaned = preprocess_with(raw, opts).to_lowercase();
    tokenize_text(&cleaned)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// Full baseline: TF-IDF on the training tweets, linear SVM, metrics on dev.
pub fn baseline_run(
    train: &[Tweet],
    dev: &[Tweet],
    c: f64,
    stopwords: &BTreeSet<String>,
    opts: &PrepOptions,
) -> Result<MetricsReport> {
    if dev.is_empty() {
        return Err(Error::InvalidArgument(
            "baseline evaluation needs a non-empty dev set".into(),
        ));
    }
    let train_docs: Vec<Vec<String>> = train
        .iter()
        .map(|t| baseline_tokens(&t.raw, stopwords, opts))
        .collect();
    let (vocab, train_x) = tfidf_fit_transform(&train_docs);
    let train_y: Vec<u8> = train.iter().map(|t| t.label).collect();
    let model = svm_train(&train_x, &train_y, c)?;

    let preds: Vec<u8> = dev
        .iter()
        .map(|t| model.predict(&vocab.transform(&baseline_tokens(&t.raw, stopwords, opts))))
        .collect();
    let golds: Vec<u8> = dev.iter().map(|t| t.label).collect();
    MetricsReport::from_predictions(&preds, &golds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(lists: &[&[&str]]) -> Vec<Vec<String>> {
        lists
            .iter()
            .map(|d| d.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    #[test]
    fn single_doc_reference_arithmetic() {
        let (vocab, x) = tfidf_fit_transform(&docs(&[&["a", "a", "b"]]));
        assert_eq!(vocab.len(), 2);
        assert_eq!(vocab.idf("a"), Some(1.0));
        assert_eq!(vocab.idf("b"), Some(1.0));
        let expect_a = 2.0 / 5.0f64.sqrt();
        let expect_b = 1.0 / 5.0f64.sqrt();
        assert_eq!(x[0].entries.len(), 2);
        assert!((x[0].entries[0].1 - expect_a).abs() < 1e-12);
        assert!((x[0].entries[1].1 - expect_b).abs() < 1e-12);
    }

    #[test]
    fn ubiquitous_term_hits_the_idf_floor() {
        let (vocab, _) = tfidf_fit_transform(&docs(&[&["the", "cat"], &["the", "dog"]]));
        assert_eq!(vocab.idf("the"), Some(1.0)); // ln(3/3)+1
        let idf_cat = vocab.idf("cat").unwrap();
        assert!((idf_cat - ((3.0f64 / 2.0).ln() + 1.0)).abs() < 1e-12);
        assert!(idf_cat >= 1.0);
    }

    #[test]
    fn nonempty_docs_have_unit_norm() {
        let (_, xs) =
            tfidf_fit_transform(&docs(&[&["a", "b", "c"], &["a", "a", "a", "d"], &["e"]]));
        for x in &xs {
            assert!((x.l2_norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_and_unseen_docs_become_zero_vectors() {
        let (vocab, _) = tfidf_fit_transform(&docs(&[&["a", "b"]]));
        let empty = vocab.transform(&[]);
        assert!(empty.entries.is_empty());
        let unseen = vocab.transform(&["zzz".to_string(), "qqq".to_string()]);
        assert!(unseen.entries.is_empty());
        // Mixed: unseen terms are simply ignored.
        let mixed = vocab.transform(&["a".to_string(), "zzz".to_string()]);
        assert_eq!(mixed.entries.len(), 1);
        assert!((mixed.l2_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vocabulary_uses_first_occurrence_order() {
        let (vocab, _) = tfidf_fit_transform(&docs(&[&["zebra", "apple"], &["mango", "apple"]]));
        assert_eq!(vocab.terms(), ["zebra", "apple", "mango"]);
    }

    fn two_point_problem() -> (Vec<SparseDoc>, Vec<u8>) {
        let x1 = SparseDoc {
            entries: vec![(0, 1.0)],
            dim: 2,
        };
        let x2 = SparseDoc {
            entries: vec![(0, -1.0)],
            dim: 2,
        };
        (vec![x1, x2], vec![1, 0])
    }

    #[test]
    fn separable_two_point_problem_is_solved_exactly() {
        let (xs, y) = two_point_problem();
        let model = svm_train(&xs, &y, 1.0).unwrap();
        assert_eq!(model.predict(&xs[0]), 1);
        assert_eq!(model.predict(&xs[1]), 0);
        // Known optimum: w = (1, 0), b = 0, objective 1/2.
        assert!((model.w[0] - 1.0).abs() < 1e-6, "w = {:?}", model.w);
        assert!(model.b.abs() < 1e-6, "b = {}", model.b);
        let obj = svm_objective(&model.w, model.b, &xs, &y, 1.0);
        assert!((obj - 0.5).abs() < 1e-6);
    }

    #[test]
    fn solution_beats_the_zero_vector() {
        let xs: Vec<SparseDoc> = (0..20)
            .map(|i| SparseDoc {
                entries: vec![
                    (i % 5, if i % 2 == 0 { 1.0 } else { -0.7 }),
                    (5 + i % 3, 0.4),
                ],
                dim: 8,
            })
            .collect();
        let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let model = svm_train(&xs, &y, 1.0).unwrap();
        let obj = svm_objective(&model.w, model.b, &xs, &y, 1.0);
        assert!(obj <= 1.0 * 20.0 + 1e-9, "objective {obj}");
    }

    #[test]
    fn single_class_input_is_rejected() {
        let (xs, _) = two_point_problem();
        assert!(matches!(
            svm_train(&xs, &[1, 1], 1.0),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn duplicating_data_with_halved_c_gives_the_same_model() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut xs = Vec::new();
        let mut y = Vec::new();
        for i in 0..24 {
            let label = (i % 2) as u8;
            let center = if label == 1 { 1.0 } else { -1.0 };
            xs.push(SparseDoc {
                entries: vec![
                    (0, center + rng.random_range(-0.3..0.3)),
                    (1, rng.random_range(-0.5..0.5)),
                ],
                dim: 2,
            });
            y.push(label);
        }
        let single = svm_train(&xs, &y, 1.0).unwrap();
        let mut xs2 = xs.clone();
        xs2.extend(xs.iter().cloned());
        let mut y2 = y.clone();
        y2.extend(y.iter().cloned());
        let doubled = svm_train(&xs2, &y2, 0.5).unwrap();
        for (a, b) in single.w.iter().zip(&doubled.w) {
            assert!((a - b).abs() < 1e-6, "{:?} vs {:?}", single.w, doubled.w);
        }
        assert!((single.b - doubled.b).abs() < 1e-6);
    }

    #[test]
    fn smo_matches_a_subgradient_oracle_on_a_small_set() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let n = 60;
        let dim = 6;
        let mut xs = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = (i % 2) as u8;
            let shift = if label == 1 { 0.9 } else { -0.9 };
            let entries: Vec<(usize, f64)> = (0..dim)
                .map(|j| (j, shift * 0.4 + rng.random_range(-0.8..0.8)))
                .collect();
            xs.push(SparseDoc { entries, dim });
            y.push(label);
        }
        let c = 1.0;
        let model = svm_train(&xs, &y, c).unwrap();
        let smo_obj = svm_objective(&model.w, model.b, &xs, &y, c);

        // Independent primal solver: projected subgradient descent with
        // averaging over the second half of the run.
        let sy: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let mut w = vec![0.0f64; dim];
        let mut b = 0.0f64;
        let mut w_avg = vec![0.0f64; dim];
        let mut b_avg = 0.0f64;
        let steps = 200_000;
        let mut averaged = 0u64;
        for t in 1..=steps {
            let mut gw: Vec<f64> = w.clone();
            let mut gb = 0.0;
            for (x, &s) in xs.iter().zip(&sy) {
                if s * (x.dot_dense(&w) + b) < 1.0 {
                    x.add_into(&mut gw, -c * s);
                    gb -= c * s;
                }
            }
            let step = 0.5 / (t as f64).sqrt();
            for (wv, g) in w.iter_mut().zip(&gw) {
                *wv -= step * g;
            }
            b -= step * gb;
            if t > steps / 2 {
                for (a, wv) in w_avg.iter_mut().zip(&w) {
                    *a += wv;
                }
                b_avg += b;
                averaged += 1;
            }
        }
        for a in &mut w_avg {
            *a /= averaged as f64;
        }
        b_avg /= averaged as f64;
        let oracle_obj = svm_objective(&w_avg, b_avg, &xs, &y, c);

        let rel = (smo_obj - oracle_obj).abs() / oracle_obj.max(1e-12);
        assert!(
            rel < 0.01,
            "SMO objective {smo_obj} vs oracle {oracle_obj} (rel {rel})"
        );
        // The oracle is approximate, so SMO should never be meaningfully worse.
        assert!(smo_obj <= oracle_obj * (1.0 + 1e-6) + 1e-9);
    }

    fn tweet(id: u64, label: u8, raw: &str) -> Tweet {
        Tweet {
            id,
            label,
            raw: raw.to_string(),
        }
    }

    #[test]
    fn baseline_tokens_lowercase_and_filter() {
        let stop = default_stopwords();
        let toks = baseline_tokens(
            "The CAT sat on the mat #irony",
            &stop,
            &PrepOptions::default(),
        );
        assert_eq!(toks, ["cat", "sat", "mat"]);
    }

    #[test]
    fn baseline_separates_a_toy_corpus() {
        let train = vec![
            tweet(1, 1, "great wonderful amazing"),
            tweet(2, 1, "wonderful great day amazing"),
            tweet(3, 0, "awful terrible horrible"),
            tweet(4, 0, "terrible awful mess horrible"),
        ];
        let m = baseline_run(
            &train,
            &train,
            1.0,
            &default_stopwords(),
            &PrepOptions::default(),
        )
        .unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.f1, 1.0);
    }

    #[test]
    fn empty_dev_set_is_an_error() {
        let train = vec![tweet(1, 1, "x y"), tweet(2, 0, "z w")];
        assert!(baseline_run(
            &train,
            &[],
            1.0,
            &default_stopwords(),
            &PrepOptions::default()
        )
        .is_err());
    }

    #[test]
    fn stopword_list_is_exactly_the_documented_179() {
        let stop = default_stopwords();
        assert_eq!(stop.len(), 179);
        for w in ["the", "don't", "shouldn't", "i", "not"] {
            assert!(stop.contains(w), "missing {w}");
        }
        assert!(stop.iter().all(|w| *w == w.to_lowercase()));
    }
}

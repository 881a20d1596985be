//! GloVe embedding tables, task vocabulary and sphere-sampled OOV vectors.
//!
//! The embedding file is assumed to be ordered by descending corpus frequency
//! (as the official GloVe distributions are), so "the low-frequency words" are
//! the last 10% of entries. Out-of-vocabulary tokens seen often enough in the
//! task corpus each get a fixed vector sampled uniformly from the sphere
//! centered at the low-frequency centroid; everything else maps to a single
//! UNK vector sampled the same way.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{derive_seed, DOMAIN_OOV, DOMAIN_UNK};
use crate::textprep::TokenSeq;

/// Parsed embedding file plus the low-frequency sphere parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    /// (token, vector) in file order.
    entries: Vec<(String, Vec<f64>)>,
    index: BTreeMap<String, usize>,
    centroid: Vec<f64>,
    radius: f64,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.entries[i].1.as_slice())
    }

    /// Entries in file order.
    pub fn entries(&self) -> &[(String, Vec<f64>)] {
        &self.entries
    }

    /// Size of the low-frequency set: the last `ceil(0.10 * V)` entries.
    pub fn low_freq_len(&self) -> usize {
        low_freq_len(self.entries.len())
    }
}

/// `ceil(0.10 * n)` in integer arithmetic (float ceil misrounds, e.g. at n=20).
fn low_freq_len(n: usize) -> usize {
    n.div_ceil(10)
}

/// Loads a GloVe text-format file (`token f1 f2 … fd` per line).
pub fn load_glove(path: &Path, dim: usize) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_glove(BufReader::new(file), dim).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parses GloVe entries from any reader; see [`load_glove`].
pub fn parse_glove<R: BufRead>(reader: R, dim: usize) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::InvalidArgument("embedding dim must be ≥ 1".into()));
    }
    let mut entries: Vec<(String, Vec<f64>)> = Vec::new();
    let mut index = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|source| Error::Io {
            path: "<reader>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-empty line has a first field");
        let mut vec = Vec::with_capacity(dim);
        for part in parts {
            let v: f64 = part.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid float {part:?}"),
            })?;
            vec.push(v);
        }
        if vec.len() != dim {
            return Err(Error::DimensionMismatch {
                line: line_no,
                expected: dim,
                found: vec.len(),
            });
        }
        if index.contains_key(token) {
            log::warn!("duplicate embedding token {token:?} at line {line_no}; keeping first");
            continue;
        }
        index.insert(token.to_string(), entries.len());
        entries.push((token.to_string(), vec));
    }
    if entries.is_empty() {
        return Err(Error::InvalidArgument(
            "embedding file contains no entries".into(),
        ));
    }

    let low = low_freq_len(entries.len());
    let tail = &entries[entries.len() - low..];
    let mut centroid = vec![0.0; dim];
    for (_, v) in tail {
        for (c, x) in centroid.iter_mut().zip(v) {
            *c += x;
        }
    }
    for c in &mut centroid {
        *c /= tail.len() as f64;
    }
    let radius = tail
        .iter()
        .map(|(_, v)| euclidean(v, &centroid))
        .sum::<f64>()
        / tail.len() as f64;

    Ok(EmbeddingTable {
        dim,
        entries,
        index,
        centroid,
        radius,
    })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Samples a point uniformly from the sphere surface `‖v − centroid‖ = radius`
/// by normalizing a Gaussian draw. Deterministic in `rng_seed`.
pub fn sample_oov_vector(centroid: &[f64], radius: f64, rng_seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let dim = centroid.len();
    loop {
        let u: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return centroid
                .iter()
                .zip(&u)
                .map(|(c, x)| c + radius * x / norm)
                .collect();
        }
        // Astronomically unlikely near-zero draw; resample.
    }
}

/// Token lookup table: GloVe vectors, per-token OOV vectors, UNK fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    table: EmbeddingTable,
    oov: BTreeMap<String, Vec<f64>>,
    unk: Vec<f64>,
    min_freq: u32,
    seed: u64,
}

/// The serializable part of a [`Vocabulary`]: everything except the embedding
/// table itself, which is restored from the original GloVe file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabArtifact {
    pub dim: usize,
    pub min_freq: u32,
    pub seed: u64,
    pub oov: BTreeMap<String, Vec<f64>>,
    pub unk: Vec<f64>,
}

/// Builds the vocabulary for a tokenized corpus: in-table tokens resolve to
/// their GloVe vectors; absent tokens with corpus frequency ≥ `min_freq` each
/// get a sphere-sampled vector (seeded from `seed` and the token bytes);
/// everything else falls back to UNK.
pub fn build_vocab(
    corpus: &[TokenSeq],
    table: EmbeddingTable,
    min_freq: u32,
    seed: u64,
) -> Result<Vocabulary> {
    if min_freq < 1 {
        return Err(Error::InvalidArgument("min_freq must be ≥ 1".into()));
    }
    let mut freq: BTreeMap<&str, u32> = BTreeMap::new();
    for seq in corpus {
        for tok in &seq.tokens {
            *freq.entry(tok).or_insert(0) += 1;
        }
    }
    let mut oov = BTreeMap::new();
    for (tok, n) in freq {
        if n >= min_freq && table.get(tok).is_none() {
            let v = sample_oov_vector(
                table.centroid(),
                table.radius(),
                derive_seed(seed, DOMAIN_OOV, tok),
            );
            oov.insert(tok.to_string(), v);
        }
    }
    let unk = sample_oov_vector(
        table.centroid(),
        table.radius(),
        derive_seed(seed, DOMAIN_UNK, ""),
    );
    Ok(Vocabulary {
        table,
        oov,
        unk,
        min_freq,
        seed,
    })
}

impl Vocabulary {
    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn min_freq(&self) -> u32 {
        self.min_freq
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn unk(&self) -> &[f64] {
        &self.unk
    }

    pub fn oov(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.oov
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    /// Resolves a token: known GloVe vector, else its OOV vector, else UNK.
    pub fn lookup(&self, token: &str) -> &[f64] {
        if let Some(v) = self.table.get(token) {
            v
        } else if let Some(v) = self.oov.get(token) {
            v
        } else {
            &self.unk
        }
    }

    /// Extracts the serializable OOV/UNK state for the `vocab.json` artifact.
    pub fn to_artifact(&self) -> VocabArtifact {
        VocabArtifact {
            dim: self.dim(),
            min_freq: self.min_freq,
            seed: self.seed,
            oov: self.oov.clone(),
            unk: self.unk.clone(),
        }
    }

    /// Reassembles a vocabulary from a freshly loaded table and a stored
    /// artifact.
    pub fn from_artifact(table: EmbeddingTable, artifact: VocabArtifact) -> Result<Self> {
        if table.dim() != artifact.dim {
            return Err(Error::InvalidArgument(format!(
                "embedding dim {} does not match stored vocabulary dim {}",
                table.dim(),
                artifact.dim
            )));
        }
        Ok(Self {
            table,
            oov: artifact.oov,
            unk: artifact.unk,
            min_freq: artifact.min_freq,
            seed: artifact.seed,
        })
    }
}

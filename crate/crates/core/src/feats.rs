//! Binary casing/digit/repetition features fused with embedding vectors.
//!
//! Four word-level bits and three sentence-level bits; the sentence bits are
//! broadcast onto every token row. With both groups enabled a d-dimensional
//! embedding becomes a (d + 7)-dimensional input row.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embed::Vocabulary;
use crate::error::{Error, Result};
use crate::textprep::TokenSeq;

/// Which feature groups to fuse with the embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub use_token_feats: bool,
    pub use_sentence_feats: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            use_token_feats: true,
            use_sentence_feats: true,
        }
    }
}

impl FeatureConfig {
    /// Input row width for embeddings of dimension `dim`.
    pub fn fused_width(&self, dim: usize) -> usize {
        dim + 4 * usize::from(self.use_token_feats) + 3 * usize::from(self.use_sentence_feats)
    }
}

impl FromStr for FeatureConfig {
    type Err = Error;

    /// Parses the CLI form: a comma-separated subset of {"token", "sentence"};
    /// the empty string (or "none") disables both groups.
    fn from_str(s: &str) -> Result<Self> {
        let mut cfg = Self {
            use_token_feats: false,
            use_sentence_feats: false,
        };
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(cfg);
        }
        for part in s.split(',') {
            match part.trim() {
                "token" => cfg.use_token_feats = true,
                "sentence" => cfg.use_sentence_feats = true,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown feature group {other:?} (expected token, sentence)"
                    )))
                }
            }
        }
        Ok(cfg)
    }
}

/// One tweet ready for the network: fused input rows plus the gold label.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    /// L×k matrix, one fused row per token.
    pub x: Vec<Vec<f64>>,
    /// 1 = ironic, 0 = non-ironic.
    pub y: u8,
    /// Id of the source tweet.
    pub source_id: u64,
}

impl EncodedExample {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

fn is_cased(c: char) -> bool {
    c.is_lowercase() || c.is_uppercase()
}

/// All cased characters lowercase, and at least one cased character.
fn fully_lower(token: &str) -> bool {
    let mut any = false;
    for c in token.chars().filter(|c| is_cased(*c)) {
        if !c.is_lowercase() {
            return false;
        }
        any = true;
    }
    any
}

/// All cased characters uppercase, and at least one cased character.
fn fully_upper(token: &str) -> bool {
    let mut any = false;
    for c in token.chars().filter(|c| is_cased(*c)) {
        if !c.is_uppercase() {
            return false;
        }
        any = true;
    }
    any
}

/// The four word-level bits: fully lowercased; fully uppercased; initial
/// uppercase with later cased characters lowercase; contains a digit.
pub fn word_features(token: &str) -> [f64; 4] {
    let initial_upper = token.chars().next().is_some_and(|c| c.is_uppercase())
        && token
            .chars()
            .skip(1)
            .filter(|c| is_cased(*c))
            .all(|c| c.is_lowercase());
    let has_digit = token.chars().any(|c| c.is_numeric());
    [
        f64::from(fully_lower(token)),
        f64::from(fully_upper(token)),
        f64::from(initial_upper),
        f64::from(has_digit),
    ]
}

/// The three sentence-level bits: some token fully lowercased; some token
/// fully uppercased; some token string repeated (exact, case-sensitive).
pub fn sentence_features(tokens: &[String]) -> [f64; 3] {
    let any_lower = tokens.iter().any(|t| fully_lower(t));
    let any_upper = tokens.iter().any(|t| fully_upper(t));
    let mut seen = std::collections::BTreeSet::new();
    let any_repeat = tokens.iter().any(|t| !seen.insert(t.as_str()));
    [
        f64::from(any_lower),
        f64::from(any_upper),
        f64::from(any_repeat),
    ]
}

/// Builds the fused input matrix for one tokenized tweet.
pub fn encode(
    tokens: &TokenSeq,
    label: u8,
    vocab: &Vocabulary,
    cfg: &FeatureConfig,
) -> Result<EncodedExample> {
    if tokens.tokens.is_empty() {
        return Err(Error::EmptySequence(tokens.source_id));
    }
    let sent = sentence_features(&tokens.tokens);
    let width = cfg.fused_width(vocab.dim());
    let x = tokens
        .tokens
        .iter()
        .map(|tok| {
            let mut row = Vec::with_capacity(width);
            row.extend_from_slice(vocab.lookup(tok));
            if cfg.use_token_feats {
                row.extend_from_slice(&word_features(tok));
            }
            if cfg.use_sentence_feats {
                row.extend_from_slice(&sent);
            }
            row
        })
        .collect();
    Ok(EncodedExample {
        x,
        y: label,
        source_id: tokens.source_id,
    })
}

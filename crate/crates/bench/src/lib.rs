//! Deterministic fixture builders shared by the benchmark targets.

use ironydet_core::baseline::SparseDoc;
use ironydet_core::feats::EncodedExample;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// A random dense input sequence at the given length and fused row width.
pub fn random_example(len: usize, width: usize, seed: u64) -> EncodedExample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EncodedExample {
        x: (0..len)
            .map(|_| (0..width).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
        y: (seed % 2) as u8,
        source_id: seed,
    }
}

/// Synthetic raw tweets that exercise every cleaning rule: trigger hashtags,
/// mentions, URLs, ordinary hashtags, emoticons, and punctuation runs.
pub fn sample_tweets(n: usize) -> Vec<String> {
    let words = [
        "love",
        "mondays",
        "great",
        "rain",
        "today",
        "really",
        "traffic",
        "fantastic",
    ];
    (0..n)
        .map(|i| {
            let a = words[i % words.len()];
            let b = words[(i + 3) % words.len()];
            match i % 5 {
                0 => format!("@user{i} just {a} this {b}!!! #sarcasm http://t.co/x{i}"),
                1 => format!("{a} {b} all day :-) #blessed"),
                2 => format!("Oh {a}, {b} again... #not www.example.com/{i}"),
                3 => format!("SO {a} right now <3 {b} #mood #sarcastic"),
                _ => format!("{a} #irony isn't it {b} :P"),
            }
        })
        .collect()
}

/// Tokenized synthetic documents for TF-IDF fitting.
pub fn random_token_docs(n: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (0..rng.random_range(8..20))
                .map(|_| format!("word{}", rng.random_range(0..300)))
                .collect()
        })
        .collect()
}

/// Random two-class sparse documents with a linearly separable shift.
pub fn random_sparse(n: usize, dim: usize, seed: u64) -> (Vec<SparseDoc>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let shift = if label == 1 { 0.35 } else { -0.35 };
        let entries = (0..dim)
            .map(|j| (j, shift + rng.random_range(-1.0..1.0)))
            .collect();
        xs.push(SparseDoc { entries, dim });
        ys.push(label);
    }
    (xs, ys)
}

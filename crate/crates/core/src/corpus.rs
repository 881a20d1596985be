//! Dataset loading and the deterministic train/development split.
//!
//! The dataset is a UTF-8 TSV with one record per line: `index<TAB>label<TAB>text`,
//! label 0 (non-ironic) or 1 (ironic), optionally preceded by a header line.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled tweet as read from the dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: u64,
    /// 1 = ironic, 0 = non-ironic.
    pub label: u8,
    pub raw: String,
}

/// A deterministic train/development partition of the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<Tweet>,
    pub dev: Vec<Tweet>,
    pub seed: u64,
}

/// Reads a dataset file. With `has_header`, the first line is skipped.
pub fn load_dataset(path: &Path, has_header: bool) -> Result<Vec<Tweet>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(BufReader::new(file), has_header).map_err(|e| match e {
        // Reattach the path to read errors surfaced from inside the reader.
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parses dataset records from any reader; line numbers in errors are 1-based
/// and count the header if present.
pub fn parse_dataset<R: Read>(reader: BufReader<R>, has_header: bool) -> Result<Vec<Tweet>> {
    let mut tweets = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|source| Error::Io {
            path: "<reader>".into(),
            source,
        })?;
        if idx == 0 && has_header {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        tweets.push(parse_record(&line, line_no)?);
    }
    Ok(tweets)
}

fn parse_record(line: &str, line_no: u64) -> Result<Tweet> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected 3 tab-separated fields, found {}", fields.len()),
        });
    }
    let id: u64 = fields[0].trim().parse().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("invalid tweet index {:?}", fields[0]),
    })?;
    let label: u8 = match fields[1].trim() {
        "0" => 0,
        "1" => 1,
        other => {
            return Err(Error::Parse {
                line: line_no,
                message: format!("label must be 0 or 1, found {other:?}"),
            })
        }
    };
    if fields[2].trim().is_empty() {
        return Err(Error::Parse {
            line: line_no,
            message: "empty tweet text".into(),
        });
    }
    Ok(Tweet {
        id,
        label,
        raw: fields[2].to_string(),
    })
}

/// Writes tweets back in the dataset TSV format (no header).
pub fn write_dataset<W: Write>(mut w: W, tweets: &[Tweet]) -> std::io::Result<()> {
    for t in tweets {
        writeln!(w, "{}\t{}\t{}", t.id, t.label, t.raw)?;
    }
    Ok(())
}

/// Splits the corpus into train/dev by a seeded uniform shuffle followed by a
/// prefix cut of `floor(ratio * N)` examples.
pub fn split(tweets: &[Tweet], ratio: f64, seed: u64) -> Result<Split> {
    split_with_options(tweets, ratio, seed, false)
}

/// Like [`split`], but with `stratified` the shuffled examples are assigned to
/// train under per-class quotas so both classes keep (as nearly as possible)
/// the same train fraction. The total train size is still `floor(ratio * N)`.
pub fn split_with_options(
    tweets: &[Tweet],
    ratio: f64,
    seed: u64,
    stratified: bool,
) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio must be in (0, 1), got {ratio}"
        )));
    }
    if tweets.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot split an empty corpus".into(),
        ));
    }
    let mut shuffled: Vec<Tweet> = tweets.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let n = shuffled.len();
    let n_train = (ratio * n as f64).floor() as usize;
    let (train, dev) = if stratified {
        let quotas = class_quotas(&shuffled, ratio, n_train);
        let mut remaining = quotas;
        let mut train = Vec::with_capacity(n_train);
        let mut dev = Vec::with_capacity(n - n_train);
        for t in shuffled {
            let q = &mut remaining[t.label as usize];
            if *q > 0 {
                *q -= 1;
                train.push(t);
            } else {
                dev.push(t);
            }
        }
        (train, dev)
    } else {
        let dev = shuffled.split_off(n_train);
        (shuffled, dev)
    };
    Ok(Split { train, dev, seed })
}

/// Per-class train quotas: floor(ratio * n_class) each, then leftover slots go
/// to classes by descending fractional remainder (label 0 first on ties).
fn class_quotas(tweets: &[Tweet], ratio: f64, n_train: usize) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for t in tweets {
        counts[t.label as usize] += 1;
    }
    let mut quotas = [0usize; 2];
    let mut rem = [0.0f64; 2];
    for c in 0..2 {
        let exact = ratio * counts[c] as f64;
        quotas[c] = exact.floor() as usize;
        rem[c] = exact - exact.floor();
    }
    let mut leftover = n_train.saturating_sub(quotas[0] + quotas[1]);
    let order = if rem[1] > rem[0] { [1, 0] } else { [0, 1] };
    for c in order {
        while leftover > 0 && quotas[c] < counts[c] {
            quotas[c] += 1;
            leftover -= 1;
        }
    }
    quotas
}

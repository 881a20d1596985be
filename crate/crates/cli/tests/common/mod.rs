//! Shared fixtures for CLI integration tests: a lexically separable toy
//! corpus, a matching 25-dimensional embedding file, and a binary runner.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const POS_WORDS: [&str; 6] = ["wonderful", "lovely", "great", "amazing", "joy", "delight"];
pub const NEG_WORDS: [&str; 6] = ["awful", "terrible", "dreadful", "mess", "gloom", "misery"];

/// Writes a 40-tweet dataset whose label is carried by disjoint word sets.
pub fn write_toy_dataset(dir: &Path) -> PathBuf {
    let mut lines = String::new();
    for i in 0..40u64 {
        let label = i % 2;
        let words = if label == 1 { POS_WORDS } else { NEG_WORDS };
        let a = words[(i / 2 % 6) as usize];
        let b = words[((i / 2 + 1) % 6) as usize];
        let c = words[((i / 2 + 3) % 6) as usize];
        lines.push_str(&format!(
            "{i}\t{label}\twhat a {a} {b} day, {c} all around #irony\n"
        ));
    }
    let path = dir.join("tweets.tsv");
    std::fs::write(&path, lines).unwrap();
    path
}

/// Writes 25-dimensional embeddings covering the corpus words, plus filler
/// entries so the out-of-vocabulary sphere has a nonzero radius. Signal words
/// carry their class on component 0; every word gets a distinct vector.
pub fn write_toy_glove(dir: &Path) -> PathBuf {
    let mut lines = String::new();
    let mut all: Vec<String> = ["what", "a", "day", ",", "all", "around"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    all.extend(POS_WORDS.iter().map(|s| s.to_string()));
    all.extend(NEG_WORDS.iter().map(|s| s.to_string()));
    all.extend((0..10).map(|i| format!("filler{i}")));
    for (i, w) in all.iter().enumerate() {
        let class = if POS_WORDS.contains(&w.as_str()) {
            1.5
        } else if NEG_WORDS.contains(&w.as_str()) {
            -1.5
        } else {
            0.0
        };
        let vals: Vec<String> = (0..25)
            .map(|j| {
                let base = (((i + 1) * (j + 2)) as f64 * 0.7).sin() * 0.3;
                let v = if j == 0 { base + class } else { base };
                format!("{v:.4}")
            })
            .collect();
        lines.push_str(&format!("{w} {}\n", vals.join(" ")));
    }
    let path = dir.join("glove.25d.txt");
    std::fs::write(&path, lines).unwrap();
    path
}

/// Runs the `ironydet` binary with the given arguments.
pub fn run_cli<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_ironydet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Flags that keep test trainings small and fast.
pub fn small_train_flags(data: &Path, glove: &Path, out: &Path) -> Vec<String> {
    [
        "--data",
        &data.display().to_string(),
        "--embeddings",
        &glove.display().to_string(),
        "--out",
        &out.display().to_string(),
        "--dim",
        "25",
        "--hidden",
        "8",
        "--dropout",
        "0.0",
        "--lr",
        "0.05",
        "--ensemble",
        "2",
        "--seed",
        "11",
        "--max-epochs",
        "20",
        "--patience",
        "20",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

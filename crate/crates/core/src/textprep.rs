//! Tweet cleaning and tokenization.
//!
//! Cleaning removes the irony trigger words (standalone and hashtagged),
//! @-mentions and URLs, then normalizes whitespace. Tokenization splits on
//! whitespace and peels leading/trailing punctuation while keeping emoticons,
//! hashtags and inner punctuation intact. Case is never altered.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Tweet;

/// Words whose presence marks a tweet as self-labeled ironic; these (and
/// their hashtag forms) are stripped so the classifier cannot read the label
/// off the surface text.
pub const TRIGGER_WORDS: [&str; 7] = [
    "not",
    "sarc",
    "sarcasm",
    "irony",
    "ironic",
    "sarcastic",
    "sarcast",
];

/// Emoticons the tokenizer keeps whole. Longest match wins when peeling.
pub const EMOTICONS: [&str; 34] = [
    ":)", ":-)", ":(", ":-(", ":D", ":-D", ":P", ":-P", ":p", ":O", ":o", ";)", ";-)", ";(", ":'(",
    ":'-(", ":/", ":-/", ":\\", ":|", ":*", "<3", "</3", "=)", "=(", "=D", "D:", ":3", "^_^",
    "-_-", "o_O", "O_o", "xD", "XD",
];

/// Cleaning options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepOptions {
    /// Remove the standalone word "not". Hashtag "#not" is always removed.
    pub remove_not: bool,
}

impl Default for PrepOptions {
    fn default() -> Self {
        Self { remove_not: true }
    }
}

/// Tokenized tweet text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
    pub source_id: u64,
}

/// One line of the `prep` subcommand's JSONL output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepRecord {
    pub id: u64,
    pub label: u8,
    pub tokens: Vec<String>,
}

// Alternations are ordered longest-first so maximal trigger forms win.
const TRIGGER_ALT: &str = "sarcastic|sarcasm|sarcast|sarc|ironic|irony|not";
const TRIGGER_ALT_KEEP_NOT: &str = "sarcastic|sarcasm|sarcast|sarc|ironic|irony";

fn hashtag_trigger_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&format!(r"(?i)#+(?:{TRIGGER_ALT})\b")).unwrap())
}

fn bare_trigger_re(remove_not: bool) -> &'static Regex {
    static WITH_NOT: OnceLock<Regex> = OnceLock::new();
    static WITHOUT_NOT: OnceLock<Regex> = OnceLock::new();
    if remove_not {
        WITH_NOT.get_or_init(|| Regex::new(&format!(r"(?i)\b(?:{TRIGGER_ALT})\b")).unwrap())
    } else {
        WITHOUT_NOT
            .get_or_init(|| Regex::new(&format!(r"(?i)\b(?:{TRIGGER_ALT_KEEP_NOT})\b")).unwrap())
    }
}

/// Cleans raw tweet text with default options (standalone "not" removed).
pub fn preprocess(raw: &str) -> String {
    preprocess_with(raw, &PrepOptions::default())
}

/// Cleans raw tweet text: drops mention/URL tokens, strips trigger words and
/// hashtags, collapses whitespace and trims. Idempotent.
pub fn preprocess_with(raw: &str, opts: &PrepOptions) -> String {
    // Mentions and URLs first, so a mention of a trigger word ("@not") cannot
    // leave a dangling "@" behind.
    let kept: Vec<&str> = raw
        .split_whitespace()
        .filter(|chunk| !is_mention(chunk) && !is_url(chunk))
        .collect();
    let text = kept.join(" ");
    // Hashtag forms before bare words, so "#not" does not decay to "#".
    let text = hashtag_trigger_re().replace_all(&text, "");
    let text = bare_trigger_re(opts.remove_not).replace_all(&text, "");
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_mention(chunk: &str) -> bool {
    let mut chars = chunk.chars();
    chars.next() == Some('@') && chars.next().is_some_and(is_word_char)
}

fn is_url(chunk: &str) -> bool {
    ["http://", "https://", "www."].iter().any(|p| {
        chunk.len() >= p.len() && chunk.as_bytes()[..p.len()].eq_ignore_ascii_case(p.as_bytes())
    })
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Tokenizes cleaned text (see [`tokenize_text`]) and tags it with the tweet id.
pub fn tokenize(cleaned: &str, source_id: u64) -> TokenSeq {
    TokenSeq {
        tokens: tokenize_text(cleaned),
        source_id,
    }
}

/// Splits text on whitespace, then peels punctuation off each chunk:
///
/// * emoticons from [`EMOTICONS`] are kept whole (longest match first);
/// * `#` followed by a word character stays attached (`#word` is one token);
/// * runs of the same punctuation character form one token (`!!!`, `...`);
/// * punctuation inside a word core stays put (`don't` is one token).
pub fn tokenize_text(cleaned: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in cleaned.split_whitespace() {
        split_chunk(chunk, &mut tokens);
    }
    tokens
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    let mut core = chunk;
    let mut back: Vec<&str> = Vec::new();

    // Peel from the front.
    loop {
        if core.is_empty() || is_emoticon(core) {
            break;
        }
        if let Some(emo) = emoticon_prefix(core) {
            out.push(emo.to_string());
            core = &core[emo.len()..];
            continue;
        }
        let first = core.chars().next().unwrap();
        if is_word_char(first) {
            break;
        }
        if first == '#' && core.chars().nth(1).is_some_and(is_word_char) {
            break;
        }
        let run_len = core.chars().take_while(|&c| c == first).count() * first.len_utf8();
        out.push(core[..run_len].to_string());
        core = &core[run_len..];
    }

    // Peel from the back; peeled pieces come out outermost-first.
    loop {
        if core.is_empty() || is_emoticon(core) {
            break;
        }
        if let Some(emo) = emoticon_suffix(core) {
            back.push(emo);
            core = &core[..core.len() - emo.len()];
            continue;
        }
        let last = core.chars().next_back().unwrap();
        if is_word_char(last) {
            break;
        }
        let run_len = core.chars().rev().take_while(|&c| c == last).count() * last.len_utf8();
        back.push(&core[core.len() - run_len..]);
        core = &core[..core.len() - run_len];
    }

    if !core.is_empty() {
        out.push(core.to_string());
    }
    out.extend(back.iter().rev().map(|s| s.to_string()));
}

fn is_emoticon(s: &str) -> bool {
    EMOTICONS.contains(&s)
}

fn emoticon_prefix(s: &str) -> Option<&'static str> {
    EMOTICONS
        .iter()
        .filter(|e| s.starts_with(*e))
        .max_by_key(|e| e.len())
        .copied()
}

fn emoticon_suffix(s: &str) -> Option<&'static str> {
    EMOTICONS
        .iter()
        .filter(|e| s.ends_with(*e))
        .max_by_key(|e| e.len())
        .copied()
}

/// Cleans and tokenizes one tweet.
pub fn prep_tweet(tweet: &Tweet, opts: &PrepOptions) -> TokenSeq {
    tokenize(&preprocess_with(&tweet.raw, opts), tweet.id)
}

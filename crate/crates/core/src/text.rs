//! Word splitting and normalization shared by the filters and metrics.

use std::sync::OnceLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

/// Splits on Unicode whitespace. This is the single definition of "word"
/// used throughout the crate.
pub fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

pub fn word_count(text: &str) -> usize {
    words(text).count()
}

fn punctuation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{P}").expect("valid punctuation class"))
}

/// Lexical normalization used for near-exact duplicate detection:
/// NFKC, lowercase, punctuation removed, whitespace collapsed to single
/// spaces and trimmed.
pub fn normalize_lexical(text: &str) -> String {
    let nfkc: String = text.nfkc().collect();
    let lower = nfkc.to_lowercase();
    let stripped = punctuation().replace_all(&lower, " ");
    let mut out = String::with_capacity(stripped.len());
    for w in stripped.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w);
    }
    out
}

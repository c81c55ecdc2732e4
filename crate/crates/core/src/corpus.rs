//! Pretraining document filters.
//!
//! Rules, in pipeline order:
//! 1. language-identification score below a threshold
//! 2. fewer than a minimum number of words
//! 3. duplicate URL, or too high a share of stopword tokens
//! 4. exact duplicate text
//!
//! Each rule is a pure, order-preserving function. [`run_pipeline`] applies
//! all four in one pass and attributes every dropped document to the first
//! rule it fails, which yields the same kept set as chaining the rules.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::text::{word_count, words};

pub const RULE_LANGUAGE: &str = "language";
pub const RULE_SHORT: &str = "short";
pub const RULE_DUPLICATE_URL: &str = "duplicate_url";
pub const RULE_STOPWORDS: &str = "stopword_ratio";
pub const RULE_EXACT_DUPLICATE: &str = "exact_duplicate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Web,
    Books,
    Wiki,
    News,
    Science,
    Code,
    Math,
    Other,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Web => "web",
            Domain::Books => "books",
            Domain::Wiki => "wiki",
            Domain::News => "news",
            Domain::Science => "science",
            Domain::Code => "code",
            Domain::Math => "math",
            Domain::Other => "other",
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| crate::Error::InvalidParameter(format!("unknown domain {s:?}")))
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    #[default]
    Natural,
    Translated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub text: String,
    pub lang: String,
    pub lang_score: f64,
    pub domain: Domain,
    #[serde(default)]
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct FilterReport {
    pub input_count: usize,
    pub kept_count: usize,
    pub dropped_by_rule: BTreeMap<String, usize>,
}

impl FilterReport {
    pub fn new(input_count: usize) -> Self {
        Self {
            input_count,
            kept_count: 0,
            dropped_by_rule: BTreeMap::new(),
        }
    }

    pub fn drop(&mut self, rule: &str) {
        *self.dropped_by_rule.entry(rule.to_string()).or_default() += 1;
    }

    pub fn dropped(&self) -> usize {
        self.dropped_by_rule.values().sum()
    }

    /// `input_count == kept_count + dropped`.
    pub fn reconciles(&self) -> bool {
        self.input_count == self.kept_count + self.dropped()
    }

    /// Adds another report's counts into this one.
    pub fn absorb(&mut self, other: &FilterReport) {
        self.input_count += other.input_count;
        self.kept_count += other.kept_count;
        for (k, v) in &other.dropped_by_rule {
            *self.dropped_by_rule.entry(k.clone()).or_default() += v;
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub lang_threshold: f64,
    pub min_words: usize,
    /// Lowercased stopword (and spam) terms. An empty list disables the
    /// ratio rule.
    pub stopwords: HashSet<String>,
    pub max_stopword_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            lang_threshold: 0.95,
            min_words: 30,
            stopwords: default_stopwords(),
            max_stopword_ratio: 0.7,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(0.0..=1.0).contains(&self.lang_threshold) {
            return Err(crate::Error::InvalidParameter(format!(
                "language threshold {} outside [0, 1]",
                self.lang_threshold
            )));
        }
        if self.min_words < 1 {
            return Err(crate::Error::InvalidParameter(
                "min_words must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.max_stopword_ratio) {
            return Err(crate::Error::InvalidParameter(format!(
                "stopword ratio {} outside [0, 1]",
                self.max_stopword_ratio
            )));
        }
        Ok(())
    }
}

/// Keeps documents with `lang_score >= threshold`.
pub fn filter_language(docs: Vec<Document>, threshold: f64) -> (Vec<Document>, FilterReport) {
    retain(docs, RULE_LANGUAGE, |d| d.lang_score >= threshold)
}

/// Keeps documents with at least `min_words` whitespace-delimited words.
pub fn filter_short(docs: Vec<Document>, min_words: usize) -> (Vec<Document>, FilterReport) {
    retain(docs, RULE_SHORT, |d| word_count(&d.text) >= min_words)
}

/// Drops later documents repeating an earlier URL, then documents whose
/// stopword share exceeds `max_ratio`. Documents without a URL skip the URL
/// rule. A URL counts as seen from its first occurrence, even if that
/// document is then dropped by the stopword rule.
pub fn filter_url_and_stopwords(
    docs: Vec<Document>,
    stopwords: &HashSet<String>,
    max_ratio: f64,
) -> (Vec<Document>, FilterReport) {
    let mut report = FilterReport::new(docs.len());
    let mut seen = HashSet::new();
    let kept: Vec<Document> = docs
        .into_iter()
        .filter(
            |d| match url_and_stopword_rule(d, &mut seen, stopwords, max_ratio) {
                Some(rule) => {
                    report.drop(rule);
                    false
                }
                None => true,
            },
        )
        .collect();
    report.kept_count = kept.len();
    (kept, report)
}

/// Keeps the first document for each distinct text, compared by SHA-256 of
/// the raw bytes.
pub fn dedup_exact(docs: Vec<Document>) -> (Vec<Document>, FilterReport) {
    let mut seen = HashSet::new();
    retain(docs, RULE_EXACT_DUPLICATE, |d| {
        seen.insert(text_digest(&d.text))
    })
}

/// Applies all four rules in one pass.
pub fn run_pipeline(docs: Vec<Document>, config: &FilterConfig) -> (Vec<Document>, FilterReport) {
    let mut report = FilterReport::new(docs.len());
    let mut seen_urls = HashSet::new();
    let mut seen_texts = HashSet::new();
    let kept: Vec<Document> = docs
        .into_iter()
        .filter(|d| {
            let rule = if d.lang_score < config.lang_threshold {
                Some(RULE_LANGUAGE)
            } else if word_count(&d.text) < config.min_words {
                Some(RULE_SHORT)
            } else if let Some(rule) = url_and_stopword_rule(
                d,
                &mut seen_urls,
                &config.stopwords,
                config.max_stopword_ratio,
            ) {
                Some(rule)
            } else if !seen_texts.insert(text_digest(&d.text)) {
                Some(RULE_EXACT_DUPLICATE)
            } else {
                None
            };
            match rule {
                Some(rule) => {
                    report.drop(rule);
                    false
                }
                None => true,
            }
        })
        .collect();
    report.kept_count = kept.len();
    (kept, report)
}

/// Fraction of words that are stopwords (case-insensitive). Zero for empty
/// text.
pub fn stopword_ratio(text: &str, stopwords: &HashSet<String>) -> f64 {
    let (mut total, mut hits) = (0usize, 0usize);
    for w in words(text) {
        total += 1;
        if stopwords.contains(&w.to_lowercase()) {
            hits += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Heuristic language score for fixtures: the share of Arabic-script letters
/// (for `"ar"`) or Basic-Latin letters (for anything else) among letters of
/// either script. Real pipelines supply scores from a proper identifier.
pub fn heuristic_lang_score(text: &str, lang: &str) -> f64 {
    let (mut arabic, mut latin) = (0usize, 0usize);
    for c in text.chars() {
        if c.is_ascii_alphabetic() {
            latin += 1;
        } else if is_arabic_letter(c) {
            arabic += 1;
        }
    }
    let total = arabic + latin;
    if total == 0 {
        return 0.0;
    }
    let hits = if lang == "ar" { arabic } else { latin };
    hits as f64 / total as f64
}

fn is_arabic_letter(c: char) -> bool {
    matches!(c, '\u{0621}'..='\u{064A}' | '\u{0671}'..='\u{06D3}' | '\u{FB50}'..='\u{FDFF}' | '\u{FE70}'..='\u{FEFF}')
}

fn url_and_stopword_rule(
    d: &Document,
    seen_urls: &mut HashSet<String>,
    stopwords: &HashSet<String>,
    max_ratio: f64,
) -> Option<&'static str> {
    if let Some(url) = &d.url {
        if !seen_urls.insert(url.clone()) {
            return Some(RULE_DUPLICATE_URL);
        }
    }
    if !stopwords.is_empty() && stopword_ratio(&d.text, stopwords) > max_ratio {
        return Some(RULE_STOPWORDS);
    }
    None
}

fn text_digest(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

fn retain(
    docs: Vec<Document>,
    rule: &str,
    mut keep: impl FnMut(&Document) -> bool,
) -> (Vec<Document>, FilterReport) {
    let mut report = FilterReport::new(docs.len());
    let kept: Vec<Document> = docs.into_iter().filter(|d| keep(d)).collect();
    report.kept_count = kept.len();
    let dropped = report.input_count - report.kept_count;
    if dropped > 0 {
        report.dropped_by_rule.insert(rule.to_string(), dropped);
    }
    (kept, report)
}

const ENGLISH_STOPWORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "all",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "could",
    "did",
    "do",
    "does",
    "doing",
    "down",
    "during",
    "each",
    "few",
    "for",
    "from",
    "further",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "me",
    "more",
    "most",
    "my",
    "myself",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "on",
    "once",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "same",
    "she",
    "should",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "very",
    "was",
    "we",
    "were",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "whom",
    "why",
    "will",
    "with",
    "would",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
];

const ARABIC_STOPWORDS: &[&str] = &[
    "في",
    "من",
    "على",
    "إلى",
    "الى",
    "عن",
    "مع",
    "هذا",
    "هذه",
    "ذلك",
    "تلك",
    "التي",
    "الذي",
    "الذين",
    "اللذين",
    "اللتين",
    "اللواتي",
    "هو",
    "هي",
    "هم",
    "هن",
    "أنا",
    "نحن",
    "أنت",
    "أنتم",
    "كان",
    "كانت",
    "يكون",
    "تكون",
    "ليس",
    "ليست",
    "لم",
    "لن",
    "لا",
    "ما",
    "ماذا",
    "متى",
    "أين",
    "كيف",
    "لماذا",
    "إن",
    "أن",
    "إذا",
    "اذا",
    "قد",
    "لقد",
    "ثم",
    "أو",
    "او",
    "و",
    "ف",
    "بل",
    "لكن",
    "حتى",
    "بين",
    "عند",
    "عندما",
    "كل",
    "بعض",
    "غير",
    "بعد",
    "قبل",
    "منذ",
    "حول",
    "خلال",
    "أي",
    "أيضا",
    "ايضا",
    "هناك",
    "هنا",
    "كما",
    "مثل",
    "فقط",
    "جدا",
    "به",
    "بها",
    "له",
    "لها",
    "فيه",
    "فيها",
    "منه",
    "منها",
    "عليه",
    "عليها",
    "ذات",
    "تم",
    "يتم",
];

/// Shipped English and Arabic stopword list.
pub fn default_stopwords() -> HashSet<String> {
    ENGLISH_STOPWORDS
        .iter()
        .chain(ARABIC_STOPWORDS)
        .map(|s| s.to_string())
        .collect()
}

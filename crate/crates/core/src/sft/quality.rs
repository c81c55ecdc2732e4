use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SftSample;
use crate::text::words;

pub const FLAG_UNDEFINED_PROMPT_DIVERSITY: &str = "undefined_prompt_diversity";
pub const FLAG_UNDEFINED_RESPONSE_DIVERSITY: &str = "undefined_response_diversity";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub sample_count: usize,
    pub avg_prompt_words: f64,
    pub avg_response_words: f64,
    /// Percentage of distinct non-stopwords among all non-stopwords.
    pub lexical_diversity_prompt: f64,
    pub lexical_diversity_response: f64,
    /// Number of assistant turns -> number of samples.
    pub turn_histogram: BTreeMap<usize, usize>,
    pub flagged: BTreeMap<String, Vec<String>>,
}

/// Mergeable partial counts. Merging is associative and commutative, so
/// shards can be reduced in any order.
#[derive(Debug, Clone, Default)]
pub struct QualityAccumulator {
    samples: usize,
    prompt_words: u64,
    response_words: u64,
    prompt: Side,
    response: Side,
    turn_histogram: BTreeMap<usize, usize>,
    ids: Vec<String>,
}

#[derive(Debug, Clone, Default)]
struct Side {
    unique: HashSet<String>,
    content_words: u64,
}

impl Side {
    fn add(&mut self, text: &str, stopwords: &HashSet<String>) -> u64 {
        let mut n = 0;
        for w in words(text) {
            n += 1;
            let w = w.to_lowercase();
            if stopwords.contains(&w) {
                continue;
            }
            self.content_words += 1;
            self.unique.insert(w);
        }
        n
    }

    fn merge(&mut self, other: Side) {
        self.content_words += other.content_words;
        self.unique.extend(other.unique);
    }

    fn diversity(&self) -> Option<f64> {
        (self.content_words > 0)
            .then(|| 100.0 * self.unique.len() as f64 / self.content_words as f64)
    }
}

impl QualityAccumulator {
    /// `stopwords` must be lowercase.
    pub fn add(&mut self, sample: &SftSample, stopwords: &HashSet<String>) {
        self.samples += 1;
        self.prompt_words += self.prompt.add(&sample.prompt_text(), stopwords);
        self.response_words += self.response.add(&sample.response_text(), stopwords);
        *self
            .turn_histogram
            .entry(sample.assistant_turns())
            .or_default() += 1;
        self.ids.push(sample.id.clone());
    }

    pub fn merge(mut self, other: QualityAccumulator) -> Self {
        self.samples += other.samples;
        self.prompt_words += other.prompt_words;
        self.response_words += other.response_words;
        self.prompt.merge(other.prompt);
        self.response.merge(other.response);
        for (k, v) in other.turn_histogram {
            *self.turn_histogram.entry(k).or_default() += v;
        }
        self.ids.extend(other.ids);
        self
    }

    pub fn finish(mut self) -> QualityReport {
        let mean = |total: u64| {
            if self.samples == 0 {
                0.0
            } else {
                total as f64 / self.samples as f64
            }
        };
        self.ids.sort();
        let mut flagged = BTreeMap::new();
        let prompt = self.prompt.diversity();
        let response = self.response.diversity();
        if prompt.is_none() && self.samples > 0 {
            flagged.insert(
                FLAG_UNDEFINED_PROMPT_DIVERSITY.to_string(),
                self.ids.clone(),
            );
        }
        if response.is_none() && self.samples > 0 {
            flagged.insert(
                FLAG_UNDEFINED_RESPONSE_DIVERSITY.to_string(),
                self.ids.clone(),
            );
        }
        QualityReport {
            sample_count: self.samples,
            avg_prompt_words: mean(self.prompt_words),
            avg_response_words: mean(self.response_words),
            lexical_diversity_prompt: prompt.unwrap_or(0.0),
            lexical_diversity_response: response.unwrap_or(0.0),
            turn_histogram: self.turn_histogram,
            flagged,
        }
    }
}

/// Corpus-wide word statistics over prompts (user turns) and responses
/// (assistant turns). Words are whitespace-separated and compared
/// case-insensitively; stopwords are excluded from the diversity ratio only.
/// A zero diversity denominator yields 0 and a flag listing the samples.
pub fn quality_metrics(samples: &[SftSample], stopwords: &HashSet<String>) -> QualityReport {
    let stopwords: HashSet<String> = stopwords.iter().map(|w| w.to_lowercase()).collect();
    samples
        .par_iter()
        .fold(QualityAccumulator::default, |mut acc, s| {
            acc.add(s, &stopwords);
            acc
        })
        .reduce(QualityAccumulator::default, QualityAccumulator::merge)
        .finish()
}

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SftSample;
use crate::error::{Error, Result};
use crate::text::normalize_lexical;

const NGRAM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DedupMode {
    #[default]
    NormalizedExact,
    NgramJaccard,
}

impl std::str::FromStr for DedupMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized_exact" => Ok(DedupMode::NormalizedExact),
            "ngram_jaccard" => Ok(DedupMode::NgramJaccard),
            other => Err(Error::InvalidParameter(format!(
                "unknown dedup mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedupOutcome {
    pub kept: Vec<SftSample>,
    /// Dropped ids in input order.
    pub dropped: Vec<String>,
}

/// SHA-256 over the normalized conversation, one `role\ttext` line per turn.
pub fn normalized_key(sample: &SftSample) -> [u8; 32] {
    let mut h = Sha256::new();
    for t in &sample.conversation {
        h.update(t.role.as_str().as_bytes());
        h.update(b"\t");
        h.update(normalize_lexical(&t.text).as_bytes());
        h.update(b"\n");
    }
    h.finalize().into()
}

/// Word 3-grams of the normalized conversation text (all turns in order).
/// A conversation shorter than three words contributes its whole word
/// sequence as a single gram, so short samples only match identical ones.
pub fn word_ngrams(sample: &SftSample) -> HashSet<Vec<String>> {
    let words: Vec<String> = sample
        .conversation
        .iter()
        .flat_map(|t| {
            normalize_lexical(&t.text)
                .split(' ')
                .filter(|w| !w.is_empty())
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .collect();
    if words.len() < NGRAM {
        return HashSet::from([words]);
    }
    words.windows(NGRAM).map(|w| w.to_vec()).collect()
}

/// Removes near-exact duplicates, keeping the first occurrence. In
/// `NgramJaccard` mode a sample is dropped when its 3-gram Jaccard
/// similarity to any earlier kept sample is at least `jaccard_threshold`.
pub fn dedup_near(
    samples: Vec<SftSample>,
    mode: DedupMode,
    jaccard_threshold: f64,
) -> Result<DedupOutcome> {
    match mode {
        DedupMode::NormalizedExact => Ok(dedup_normalized(samples)),
        DedupMode::NgramJaccard => {
            if !(jaccard_threshold > 0.0 && jaccard_threshold <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "jaccard threshold {jaccard_threshold} outside (0, 1]"
                )));
            }
            Ok(dedup_jaccard(samples, jaccard_threshold))
        }
    }
}

fn dedup_normalized(samples: Vec<SftSample>) -> DedupOutcome {
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for s in samples {
        if seen.insert(normalized_key(&s)) {
            kept.push(s);
        } else {
            dropped.push(s.id);
        }
    }
    DedupOutcome { kept, dropped }
}

fn dedup_jaccard(samples: Vec<SftSample>, threshold: f64) -> DedupOutcome {
    // Inverted index from gram to kept-sample slots; only samples sharing at
    // least one gram can reach a positive threshold.
    let mut index: HashMap<Vec<String>, Vec<usize>> = HashMap::new();
    let mut sizes: Vec<usize> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for s in samples {
        let grams = word_ngrams(&s);
        let mut shared: HashMap<usize, usize> = HashMap::new();
        for g in &grams {
            if let Some(slots) = index.get(g) {
                for &slot in slots {
                    *shared.entry(slot).or_default() += 1;
                }
            }
        }
        let duplicate = shared.iter().any(|(&slot, &inter)| {
            let union = grams.len() + sizes[slot] - inter;
            inter as f64 / union as f64 >= threshold
        });
        if duplicate {
            dropped.push(s.id);
            continue;
        }
        let slot = sizes.len();
        sizes.push(grams.len());
        for g in grams {
            index.entry(g).or_default().push(slot);
        }
        kept.push(s);
    }
    DedupOutcome { kept, dropped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::Turn;

    fn s(id: &str, prompt: &str, response: &str) -> SftSample {
        SftSample::new(id, vec![Turn::user(prompt), Turn::assistant(response)])
    }

    fn ids(o: &DedupOutcome) -> Vec<&str> {
        o.kept.iter().map(|s| s.id.as_str()).collect()
    }

    #[test]
    fn case_and_spacing_collapse() {
        let out = dedup_near(
            vec![
                s("1", "Hello  World!", "Fine."),
                s("2", "hello world", "fine"),
            ],
            DedupMode::NormalizedExact,
            0.9,
        )
        .unwrap();
        assert_eq!(ids(&out), vec!["1"]);
        assert_eq!(out.dropped, vec!["2"]);
    }

    #[test]
    fn role_boundaries_matter() {
        let a = SftSample::new("a", vec![Turn::user("x y"), Turn::assistant("z")]);
        let b = SftSample::new("b", vec![Turn::user("x"), Turn::assistant("y z")]);
        let out = dedup_near(vec![a, b], DedupMode::NormalizedExact, 0.9).unwrap();
        assert_eq!(out.kept.len(), 2);
    }

    #[test]
    fn jaccard_threshold_boundary() {
        // 10 words vs the same 10 with the last word changed: 8 grams each,
        // 7 shared, Jaccard 7/9.
        let base = "w1 w2 w3 w4 w5 w6 w7 w8 w9";
        let a = s("a", base, "w10");
        let b = s("b", base, "other");
        let j = 7.0 / 9.0;
        let out = dedup_near(vec![a.clone(), b.clone()], DedupMode::NgramJaccard, j).unwrap();
        assert_eq!(out.dropped, vec!["b"]);
        let out = dedup_near(vec![a, b], DedupMode::NgramJaccard, j + 1e-9).unwrap();
        assert!(out.dropped.is_empty());
    }

    #[test]
    fn short_samples_only_match_identical() {
        let out = dedup_near(
            vec![s("1", "hi", ""), s("2", "bye", ""), s("3", "Hi!", "")],
            DedupMode::NgramJaccard,
            0.5,
        )
        .unwrap();
        assert_eq!(ids(&out), vec!["1", "2"]);
    }

    #[test]
    fn threshold_validated_for_jaccard_only() {
        assert!(dedup_near(vec![], DedupMode::NgramJaccard, 0.0).is_err());
        assert!(dedup_near(vec![], DedupMode::NgramJaccard, 1.5).is_err());
        assert!(dedup_near(vec![], DedupMode::NormalizedExact, 0.0).is_ok());
    }
}

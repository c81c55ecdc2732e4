use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Role, SftSample};
use crate::error::{Error, Result};
use crate::text::word_count;

pub const RULE_EMPTY_RESPONSE: &str = "empty_response";
pub const RULE_ROLE_VIOLATION: &str = "role_violation";
pub const RULE_UNBALANCED_MARKUP: &str = "unbalanced_markup";
pub const RULE_LENGTH_OUTLIER: &str = "length_outlier";

const BRACKETS: [(char, char); 3] = [('(', ')'), ('[', ']'), ('{', '}')];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub empty_response: bool,
    pub role_violation: bool,
    pub unbalanced_markup: bool,
    /// Largest tolerated bracket imbalance in one assistant turn.
    pub bracket_tolerance: usize,
    /// Flags responses with more words than this percentile (nearest rank)
    /// of the batch. Off when `None`.
    pub length_outlier_percentile: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            empty_response: true,
            role_violation: true,
            unbalanced_markup: true,
            bracket_tolerance: 2,
            length_outlier_percentile: None,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.length_outlier_percentile {
            if !(p > 0.0 && p <= 100.0) {
                return Err(Error::InvalidParameter(format!(
                    "percentile {p} outside (0, 100]"
                )));
            }
        }
        Ok(())
    }
}

pub fn is_blank(text: &str) -> bool {
    text.chars().all(char::is_whitespace)
}

/// Number of ``` fence markers.
pub fn fence_count(text: &str) -> usize {
    text.matches("```").count()
}

/// Sum over (), [] and {} of |opening - closing|.
pub fn bracket_imbalance(text: &str) -> usize {
    BRACKETS
        .iter()
        .map(|&(open, close)| {
            let (mut o, mut c) = (0usize, 0usize);
            for ch in text.chars() {
                if ch == open {
                    o += 1;
                } else if ch == close {
                    c += 1;
                }
            }
            o.abs_diff(c)
        })
        .sum()
}

/// An odd number of code fences, or bracket imbalance above `tolerance`.
pub fn has_unbalanced_markup(text: &str, tolerance: usize) -> bool {
    fence_count(text) % 2 == 1 || bracket_imbalance(text) > tolerance
}

fn role_violation(sample: &SftSample) -> bool {
    let turns = &sample.conversation;
    turns.is_empty()
        || turns.last().map(|t| t.role) == Some(Role::User)
        || sample.validate().is_err()
}

/// Sample ids per enabled rule, in input order. Rules that flag nothing are
/// omitted, so a clean batch yields an empty map.
pub fn flag_noise(
    samples: &[SftSample],
    config: &NoiseConfig,
) -> Result<BTreeMap<String, Vec<String>>> {
    config.validate()?;
    let mut flagged: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut flag = |rule: &str, id: &str| {
        flagged
            .entry(rule.to_string())
            .or_default()
            .push(id.to_string())
    };

    let outlier_limit = config.length_outlier_percentile.and_then(|p| {
        let mut lengths: Vec<usize> = samples
            .iter()
            .map(|s| word_count(&s.response_text()))
            .collect();
        if lengths.is_empty() {
            return None;
        }
        lengths.sort_unstable();
        let rank = ((p / 100.0) * lengths.len() as f64).ceil().max(1.0) as usize;
        Some(lengths[rank.min(lengths.len()) - 1])
    });

    for s in samples {
        let assistant = || s.conversation.iter().filter(|t| t.role == Role::Assistant);
        if config.empty_response && assistant().any(|t| is_blank(&t.text)) {
            flag(RULE_EMPTY_RESPONSE, &s.id);
        }
        if config.role_violation && role_violation(s) {
            flag(RULE_ROLE_VIOLATION, &s.id);
        }
        if config.unbalanced_markup
            && assistant().any(|t| has_unbalanced_markup(&t.text, config.bracket_tolerance))
        {
            flag(RULE_UNBALANCED_MARKUP, &s.id);
        }
        if let Some(limit) = outlier_limit {
            if word_count(&s.response_text()) > limit {
                flag(RULE_LENGTH_OUTLIER, &s.id);
            }
        }
    }
    Ok(flagged)
}

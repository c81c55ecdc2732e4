//! Preference triplets (prompt, chosen, rejected) built from human-verified
//! answers and sampled candidate responses.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sft::{has_unbalanced_markup, is_blank, NoiseConfig, Role, Turn};
use crate::text::normalize_lexical;

pub const RULE_EMPTY: &str = "empty_candidate";
pub const RULE_EQUALS_ACCEPTED: &str = "equals_accepted";
pub const RULE_DUPLICATE: &str = "duplicate_candidate";
pub const RULE_FORMATTING: &str = "formatting";

pub const AUDIT_EMPTY_REJECTED: &str = "empty_rejected";
pub const AUDIT_EMPTY_CHOSEN: &str = "empty_chosen";
pub const AUDIT_CHOSEN_EQUALS_REJECTED: &str = "chosen_equals_rejected";
pub const AUDIT_PROMPT: &str = "prompt_structure";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    OnPolicy,
    OffPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub temperature: f64,
    pub top_p: f64,
    pub policy: Policy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefSeed {
    pub id: String,
    /// Conversation prefix ending with the user turn being answered.
    pub prompt: Vec<Turn>,
    pub accepted: String,
    pub candidates: Vec<Candidate>,
}

impl PrefSeed {
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidSeed {
            id: self.id.clone(),
            reason,
        };
        if is_blank(&self.accepted) {
            return Err(invalid("accepted response is empty".into()));
        }
        for (i, c) in self.candidates.iter().enumerate() {
            if !(c.temperature.is_finite() && c.temperature >= 0.0) {
                return Err(invalid(format!(
                    "candidate {i}: temperature {}",
                    c.temperature
                )));
            }
            if !(c.top_p > 0.0 && c.top_p <= 1.0) {
                return Err(invalid(format!(
                    "candidate {i}: top_p {} outside (0, 1]",
                    c.top_p
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub candidate_index: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub policy: Policy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefTriplet {
    pub seed_id: String,
    pub prompt: Vec<Turn>,
    pub chosen: String,
    pub rejected: String,
    pub provenance: Provenance,
}

impl PrefTriplet {
    /// `seed_id#candidate_index`, unique within one build.
    pub fn triplet_id(&self) -> String {
        format!("{}#{}", self.seed_id, self.provenance.candidate_index)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub seed_count: usize,
    pub candidate_count: usize,
    pub triplet_count: usize,
    pub dropped_by_rule: BTreeMap<String, usize>,
    pub seeds_without_triplets: Vec<String>,
}

impl BuildReport {
    pub fn reconciles(&self) -> bool {
        self.candidate_count == self.triplet_count + self.dropped_by_rule.values().sum::<usize>()
    }

    fn absorb(&mut self, other: BuildReport) {
        self.seed_count += other.seed_count;
        self.candidate_count += other.candidate_count;
        self.triplet_count += other.triplet_count;
        for (k, v) in other.dropped_by_rule {
            *self.dropped_by_rule.entry(k).or_default() += v;
        }
        self.seeds_without_triplets
            .extend(other.seeds_without_triplets);
    }
}

fn build_seed(seed: &PrefSeed, config: &NoiseConfig) -> (Vec<PrefTriplet>, BuildReport) {
    let mut report = BuildReport {
        seed_count: 1,
        candidate_count: seed.candidates.len(),
        ..BuildReport::default()
    };
    let accepted = normalize_lexical(&seed.accepted);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, c) in seed.candidates.iter().enumerate() {
        let rule = if is_blank(&c.text) {
            Some(RULE_EMPTY)
        } else {
            let norm = normalize_lexical(&c.text);
            if norm == accepted {
                Some(RULE_EQUALS_ACCEPTED)
            } else if !seen.insert(norm) {
                Some(RULE_DUPLICATE)
            } else if config.unbalanced_markup
                && has_unbalanced_markup(&c.text, config.bracket_tolerance)
            {
                Some(RULE_FORMATTING)
            } else {
                None
            }
        };
        match rule {
            Some(r) => *report.dropped_by_rule.entry(r.to_string()).or_default() += 1,
            None => out.push(PrefTriplet {
                seed_id: seed.id.clone(),
                prompt: seed.prompt.clone(),
                chosen: seed.accepted.clone(),
                rejected: c.text.clone(),
                provenance: Provenance {
                    candidate_index: i,
                    temperature: c.temperature,
                    top_p: c.top_p,
                    policy: c.policy,
                },
            }),
        }
    }
    report.triplet_count = out.len();
    if out.is_empty() {
        report.seeds_without_triplets.push(seed.id.clone());
    }
    (out, report)
}

/// One triplet per surviving candidate, with the accepted text as chosen.
/// Candidates are dropped, first rule wins, when empty, equal to the
/// accepted text after lexical normalization, a normalized duplicate of an
/// earlier candidate of the same seed, or carrying unbalanced markup.
pub fn build_triplets(
    seeds: &[PrefSeed],
    config: &NoiseConfig,
) -> Result<(Vec<PrefTriplet>, BuildReport)> {
    for s in seeds {
        s.validate()?;
    }
    let per: Vec<(Vec<PrefTriplet>, BuildReport)> =
        seeds.par_iter().map(|s| build_seed(s, config)).collect();
    let mut triplets = Vec::new();
    let mut report = BuildReport::default();
    for (t, r) in per {
        triplets.extend(t);
        report.absorb(r);
    }
    Ok((triplets, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub total: usize,
    pub flagged_count: usize,
    pub flagged_fraction: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Triplet ids per validator.
    pub flagged: BTreeMap<String, Vec<String>>,
}

fn prompt_ok(prompt: &[Turn]) -> bool {
    !prompt.is_empty()
        && prompt.len() % 2 == 1
        && prompt.iter().enumerate().all(|(i, t)| {
            t.role
                == if i % 2 == 0 {
                    Role::User
                } else {
                    Role::Assistant
                }
        })
}

/// Re-validates built triplets. Fails when the fraction of triplets flagged
/// by any validator exceeds `tolerance`.
pub fn audit_noise(
    triplets: &[PrefTriplet],
    tolerance: f64,
    config: &NoiseConfig,
) -> Result<AuditReport> {
    if !(0.0..=1.0).contains(&tolerance) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tolerance} outside [0, 1]"
        )));
    }
    let mut flagged: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut bad = 0;
    for t in triplets {
        let mut rules = Vec::new();
        if is_blank(&t.rejected) {
            rules.push(AUDIT_EMPTY_REJECTED);
        }
        if is_blank(&t.chosen) {
            rules.push(AUDIT_EMPTY_CHOSEN);
        }
        if normalize_lexical(&t.chosen) == normalize_lexical(&t.rejected) {
            rules.push(AUDIT_CHOSEN_EQUALS_REJECTED);
        }
        if config.unbalanced_markup && has_unbalanced_markup(&t.rejected, config.bracket_tolerance)
        {
            rules.push(RULE_FORMATTING);
        }
        if !prompt_ok(&t.prompt) {
            rules.push(AUDIT_PROMPT);
        }
        if !rules.is_empty() {
            bad += 1;
            let id = t.triplet_id();
            for r in rules {
                flagged.entry(r.to_string()).or_default().push(id.clone());
            }
        }
    }
    let fraction = if triplets.is_empty() {
        0.0
    } else {
        bad as f64 / triplets.len() as f64
    };
    Ok(AuditReport {
        total: triplets.len(),
        flagged_count: bad,
        flagged_fraction: fraction,
        tolerance,
        passed: fraction <= tolerance,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(text: &str) -> Candidate {
        Candidate {
            text: text.into(),
            temperature: 0.7,
            top_p: 0.9,
            policy: Policy::OnPolicy,
        }
    }

    fn seed(id: &str, accepted: &str, candidates: &[&str]) -> PrefSeed {
        PrefSeed {
            id: id.into(),
            prompt: vec![Turn::user("question")],
            accepted: accepted.into(),
            candidates: candidates.iter().map(|c| cand(c)).collect(),
        }
    }

    #[test]
    fn filters_in_order() {
        let s = seed(
            "s",
            "The answer.",
            &["", "the answer", "other", "Other!", "x (((", "fine"],
        );
        let (t, r) = build_triplets(&[s], &NoiseConfig::default()).unwrap();
        let rejected: Vec<&str> = t.iter().map(|t| t.rejected.as_str()).collect();
        assert_eq!(rejected, vec!["other", "fine"]);
        assert!(t.iter().all(|t| t.chosen == "The answer."));
        assert_eq!(t[1].provenance.candidate_index, 5);
        for rule in [
            RULE_EMPTY,
            RULE_EQUALS_ACCEPTED,
            RULE_DUPLICATE,
            RULE_FORMATTING,
        ] {
            assert_eq!(r.dropped_by_rule[rule], 1, "{rule}");
        }
        assert!(r.reconciles());
        assert!(r.seeds_without_triplets.is_empty());
    }

    #[test]
    fn identical_candidates_give_one_triplet() {
        let s = seed("s", "yes", &["no"; 10]);
        let (t, r) = build_triplets(&[s], &NoiseConfig::default()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(r.dropped_by_rule[RULE_DUPLICATE], 9);
    }

    #[test]
    fn seed_without_survivors_is_reported() {
        let s = seed("dead", "yes", &["Yes", ""]);
        let (t, r) = build_triplets(&[s], &NoiseConfig::default()).unwrap();
        assert!(t.is_empty());
        assert_eq!(r.seeds_without_triplets, vec!["dead"]);
    }

    #[test]
    fn invalid_seed() {
        let mut s = seed("s", " ", &["a"]);
        assert!(matches!(
            build_triplets(&[s.clone()], &NoiseConfig::default()),
            Err(Error::InvalidSeed { .. })
        ));
        s.accepted = "ok".into();
        s.candidates[0].top_p = 0.0;
        assert!(build_triplets(&[s], &NoiseConfig::default()).is_err());
    }

    #[test]
    fn audit_thresholds() {
        let seeds: Vec<PrefSeed> = (0..500)
            .map(|i| seed(&format!("s{i}"), "good", &["bad"]))
            .collect();
        let (mut t, _) = build_triplets(&seeds, &NoiseConfig::default()).unwrap();
        let cfg = NoiseConfig::default();
        let clean = audit_noise(&t, 0.001, &cfg).unwrap();
        assert!(clean.passed);
        assert_eq!(clean.flagged_count, 0);
        t[17].rejected = String::new();
        let r = audit_noise(&t, 0.001, &cfg).unwrap();
        assert!(!r.passed);
        assert_eq!(r.flagged[AUDIT_EMPTY_REJECTED], vec!["s17#0"]);
        assert!(audit_noise(&t, 0.01, &cfg).unwrap().passed);
    }
}

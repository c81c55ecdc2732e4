//! Human pairwise evaluation: majority-vote aggregation, win rates and ELO.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AWins,
    BWins,
    Tie,
    BothBad,
}

impl Verdict {
    /// The same verdict seen with the two models swapped.
    pub fn flipped(self) -> Self {
        match self {
            Verdict::AWins => Verdict::BWins,
            Verdict::BWins => Verdict::AWins,
            v => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub prompt_id: String,
    pub model_a: String,
    pub model_b: String,
    pub evaluator_id: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub prompt_id: String,
    pub model_a: String,
    pub model_b: String,
    pub outcome: Verdict,
    pub vote_count: usize,
}

/// A three-way split waiting for a fourth vote. Models are in canonical
/// (sorted) order and verdicts are oriented accordingly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingGroup {
    pub prompt_id: String,
    pub model_a: String,
    pub model_b: String,
    pub verdicts: Vec<Verdict>,
}

type GroupKey = (String, String, String);

/// Groups votes by prompt and unordered model pair and decides each group.
///
/// Three votes: a verdict with at least two votes wins; a three-way split is
/// returned as pending. Four votes: a verdict with three or more votes wins,
/// a single verdict with two votes wins, and a 2-2 or all-distinct split is
/// a tie. Results are oriented so that `model_a < model_b` and sorted by
/// (prompt, models), so vote order does not matter.
pub fn aggregate_votes(votes: &[VoteRecord]) -> Result<(Vec<MatchResult>, Vec<PendingGroup>)> {
    let mut groups: BTreeMap<GroupKey, Vec<(&str, Verdict)>> = BTreeMap::new();
    for v in votes {
        if v.model_a == v.model_b {
            return Err(Error::InvalidVoteGroup {
                group: group_name(&v.prompt_id, &v.model_a, &v.model_b),
                reason: "a model cannot be compared with itself".into(),
            });
        }
        let (key, verdict) = if v.model_a < v.model_b {
            (
                (v.prompt_id.clone(), v.model_a.clone(), v.model_b.clone()),
                v.verdict,
            )
        } else {
            (
                (v.prompt_id.clone(), v.model_b.clone(), v.model_a.clone()),
                v.verdict.flipped(),
            )
        };
        groups
            .entry(key)
            .or_default()
            .push((&v.evaluator_id, verdict));
    }

    let mut matches = Vec::new();
    let mut pending = Vec::new();
    for ((prompt_id, a, b), group) in groups {
        let invalid = |reason: String| Error::InvalidVoteGroup {
            group: group_name(&prompt_id, &a, &b),
            reason,
        };
        let mut evaluators = HashSet::new();
        for (e, _) in &group {
            if !evaluators.insert(*e) {
                return Err(invalid(format!("evaluator {e:?} voted twice")));
            }
        }
        if !(3..=4).contains(&group.len()) {
            return Err(invalid(format!("{} votes, expected 3 or 4", group.len())));
        }
        let mut verdicts: Vec<Verdict> = group.iter().map(|(_, v)| *v).collect();
        verdicts.sort();
        match decide(&verdicts) {
            Some(outcome) => matches.push(MatchResult {
                prompt_id,
                model_a: a,
                model_b: b,
                outcome,
                vote_count: verdicts.len(),
            }),
            None => pending.push(PendingGroup {
                prompt_id,
                model_a: a,
                model_b: b,
                verdicts,
            }),
        }
    }
    Ok((matches, pending))
}

fn group_name(prompt: &str, a: &str, b: &str) -> String {
    format!("{prompt}:{a}/{b}")
}

fn decide(verdicts: &[Verdict]) -> Option<Verdict> {
    let mut counts: BTreeMap<Verdict, usize> = BTreeMap::new();
    for &v in verdicts {
        *counts.entry(v).or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    let leaders: Vec<Verdict> = counts
        .iter()
        .filter(|(_, &c)| c == top)
        .map(|(&v, _)| v)
        .collect();
    match (verdicts.len(), leaders.as_slice()) {
        (_, [only]) if top >= 2 => Some(*only),
        (3, _) => None,
        _ => Some(Verdict::Tie),
    }
}

/// Outcome fractions of `model` against `opponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRates {
    pub model: String,
    pub opponent: String,
    pub matches: usize,
    pub win: f64,
    pub loss: f64,
    pub tie: f64,
    pub both_bad: f64,
}

/// Win/loss/tie/both-bad fractions for every ordered pair that played at
/// least one match, sorted by (model, opponent).
pub fn win_rates(matches: &[MatchResult]) -> Vec<PairRates> {
    // [win, loss, tie, both_bad] counts from the first model's side.
    let mut counts: BTreeMap<(String, String), [usize; 4]> = BTreeMap::new();
    for m in matches {
        let slot = |v: Verdict| match v {
            Verdict::AWins => 0,
            Verdict::BWins => 1,
            Verdict::Tie => 2,
            Verdict::BothBad => 3,
        };
        counts
            .entry((m.model_a.clone(), m.model_b.clone()))
            .or_default()[slot(m.outcome)] += 1;
        counts
            .entry((m.model_b.clone(), m.model_a.clone()))
            .or_default()[slot(m.outcome.flipped())] += 1;
    }
    counts
        .into_iter()
        .map(|((model, opponent), c)| {
            let n: usize = c.iter().sum();
            let f = |i: usize| c[i] as f64 / n as f64;
            PairRates {
                model,
                opponent,
                matches: n,
                win: f(0),
                loss: f(1),
                tie: f(2),
                both_bad: f(3),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EloConfig {
    /// Both-bad scores 0.5 for each model, like a tie.
    #[default]
    Default,
    /// Both-bad scores 0 for each model.
    Custom,
}

impl std::str::FromStr for EloConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(EloConfig::Default),
            "custom" => Ok(EloConfig::Custom),
            other => Err(Error::InvalidParameter(format!(
                "unknown ELO config {other:?}"
            ))),
        }
    }
}

impl EloConfig {
    pub fn scores(self, outcome: Verdict) -> (f64, f64) {
        match (outcome, self) {
            (Verdict::AWins, _) => (1.0, 0.0),
            (Verdict::BWins, _) => (0.0, 1.0),
            (Verdict::Tie, _) | (Verdict::BothBad, EloConfig::Default) => (0.5, 0.5),
            (Verdict::BothBad, EloConfig::Custom) => (0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub model: String,
    pub elo: f64,
    pub matches: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EloParams {
    pub config: EloConfig,
    pub k_factor: f64,
    pub initial: f64,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for EloParams {
    fn default() -> Self {
        EloParams {
            config: EloConfig::Default,
            k_factor: 32.0,
            initial: 1000.0,
            permutations: 100,
            seed: 0,
        }
    }
}

/// Expected score of a player rated `ra` against one rated `rb`.
pub fn expected_score(ra: f64, rb: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((rb - ra) / 400.0))
}

/// One sequential ELO pass over `matches` in the given order. `pairs` holds
/// model indices per match.
pub fn elo_pass(
    ratings: &mut [f64],
    pairs: &[(usize, usize)],
    outcomes: &[Verdict],
    order: &[usize],
    config: EloConfig,
    k: f64,
) {
    for &i in order {
        let (a, b) = pairs[i];
        let (ea, eb) = (
            expected_score(ratings[a], ratings[b]),
            expected_score(ratings[b], ratings[a]),
        );
        let (sa, sb) = config.scores(outcomes[i]);
        ratings[a] += k * (sa - ea);
        ratings[b] += k * (sb - eb);
    }
}

/// Mean ELO over `permutations` seeded shuffles of the match order. Replica
/// `r` shuffles with ChaCha8 seeded by `seed` on stream `r`; replicas run in
/// parallel and are averaged in replica order, so the result equals serial
/// evaluation bit for bit. Ratings are sorted by model name.
pub fn elo_scores(matches: &[MatchResult], params: &EloParams) -> Result<Vec<Rating>> {
    if !(params.k_factor.is_finite() && params.k_factor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "k_factor {} must be positive",
            params.k_factor
        )));
    }
    if !params.initial.is_finite() {
        return Err(Error::InvalidParameter(
            "initial rating must be finite".into(),
        ));
    }
    if params.permutations == 0 {
        return Err(Error::InvalidParameter(
            "permutations must be at least 1".into(),
        ));
    }
    let models: Vec<String> = matches
        .iter()
        .flat_map(|m| [m.model_a.clone(), m.model_b.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index = |name: &str| {
        models
            .binary_search_by(|m| m.as_str().cmp(name))
            .expect("collected above")
    };
    let mut played = vec![0usize; models.len()];
    let pairs: Vec<(usize, usize)> = matches
        .iter()
        .map(|m| {
            let (a, b) = (index(&m.model_a), index(&m.model_b));
            played[a] += 1;
            played[b] += 1;
            (a, b)
        })
        .collect();
    let outcomes: Vec<Verdict> = matches.iter().map(|m| m.outcome).collect();

    let replicas: Vec<Vec<f64>> = (0..params.permutations as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(r);
            let mut order: Vec<usize> = (0..matches.len()).collect();
            order.shuffle(&mut rng);
            let mut ratings = vec![params.initial; models.len()];
            elo_pass(
                &mut ratings,
                &pairs,
                &outcomes,
                &order,
                params.config,
                params.k_factor,
            );
            ratings
        })
        .collect();
    let mut mean = vec![0.0; models.len()];
    for r in &replicas {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    Ok(models
        .into_iter()
        .zip(mean)
        .zip(played)
        .map(|((model, sum), matches)| Rating {
            model,
            elo: sum / params.permutations as f64,
            matches,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vote(prompt: &str, a: &str, b: &str, eval: &str, verdict: Verdict) -> VoteRecord {
        VoteRecord {
            prompt_id: prompt.into(),
            model_a: a.into(),
            model_b: b.into(),
            evaluator_id: eval.into(),
            verdict,
        }
    }

    fn group(verdicts: &[Verdict]) -> Vec<VoteRecord> {
        verdicts
            .iter()
            .enumerate()
            .map(|(i, &v)| vote("p", "m1", "m2", &format!("e{i}"), v))
            .collect()
    }

    fn mat(a: &str, b: &str, outcome: Verdict) -> MatchResult {
        MatchResult {
            prompt_id: "p".into(),
            model_a: a.into(),
            model_b: b.into(),
            outcome,
            vote_count: 3,
        }
    }

    use Verdict::*;

    #[test]
    fn majority_of_three() {
        let (m, p) = aggregate_votes(&group(&[AWins, AWins, BWins])).unwrap();
        assert_eq!(m[0].outcome, AWins);
        assert!(p.is_empty());
        let (m, _) = aggregate_votes(&group(&[BothBad, BothBad, Tie])).unwrap();
        assert_eq!(m[0].outcome, BothBad);
    }

    #[test]
    fn fourth_vote_breaks_split() {
        let (m, p) = aggregate_votes(&group(&[AWins, BWins, Tie])).unwrap();
        assert!(m.is_empty());
        assert_eq!(p[0].verdicts, vec![AWins, BWins, Tie]);
        let (m, p) = aggregate_votes(&group(&[AWins, BWins, Tie, AWins])).unwrap();
        assert!(p.is_empty());
        assert_eq!((m[0].outcome, m[0].vote_count), (AWins, 4));
        let (m, _) = aggregate_votes(&group(&[AWins, BWins, AWins, BWins])).unwrap();
        assert_eq!(m[0].outcome, Tie);
        let (m, _) = aggregate_votes(&group(&[AWins, BWins, Tie, BothBad])).unwrap();
        assert_eq!(m[0].outcome, Tie);
    }

    #[test]
    fn orientation_is_canonical() {
        let votes = vec![
            vote("p", "z", "a", "e1", AWins),
            vote("p", "a", "z", "e2", BWins),
            vote("p", "z", "a", "e3", BWins),
        ];
        let (m, _) = aggregate_votes(&votes).unwrap();
        assert_eq!((m[0].model_a.as_str(), m[0].outcome), ("a", BWins));
        let mut reversed = votes.clone();
        reversed.reverse();
        assert_eq!(aggregate_votes(&reversed).unwrap().0, m);
    }

    #[test]
    fn bad_groups() {
        assert!(aggregate_votes(&group(&[AWins, AWins])).is_err());
        assert!(aggregate_votes(&group(&[AWins; 5])).is_err());
        let mut dup = group(&[AWins, AWins, AWins]);
        dup[2].evaluator_id = "e0".into();
        assert!(matches!(
            aggregate_votes(&dup),
            Err(Error::InvalidVoteGroup { .. })
        ));
        assert!(aggregate_votes(&[vote("p", "m", "m", "e", Tie)]).is_err());
    }

    #[test]
    fn win_rate_counts() {
        let mut ms = Vec::new();
        ms.extend(std::iter::repeat_n(mat("a", "b", AWins), 6));
        ms.extend(std::iter::repeat_n(mat("a", "b", BWins), 3));
        ms.push(mat("a", "b", Tie));
        let r = win_rates(&ms);
        assert_eq!(r.len(), 2);
        assert_eq!(
            (r[0].win, r[0].loss, r[0].tie, r[0].both_bad),
            (0.6, 0.3, 0.1, 0.0)
        );
        assert_eq!((r[1].model.as_str(), r[1].win, r[1].loss), ("b", 0.3, 0.6));
        assert!(r.iter().all(|p| p.opponent != "c"));
    }

    #[test]
    fn single_match_update() {
        let params = EloParams {
            permutations: 1,
            ..EloParams::default()
        };
        let r = elo_scores(&[mat("a", "b", AWins)], &params).unwrap();
        assert_eq!((r[0].elo, r[1].elo), (1016.0, 984.0));
        assert_eq!(expected_score(1234.5, 1234.5), 0.5);
    }

    #[test]
    fn both_bad_configs() {
        let ms = vec![
            mat("a", "b", BothBad),
            mat("b", "c", BothBad),
            mat("a", "c", BothBad),
        ];
        let default = elo_scores(&ms, &EloParams::default()).unwrap();
        assert!(default.iter().all(|r| r.elo == 1000.0));
        let custom = EloParams {
            config: EloConfig::Custom,
            ..EloParams::default()
        };
        let custom = elo_scores(&ms, &custom).unwrap();
        assert!(custom.iter().all(|r| r.elo < 1000.0));
        let one = elo_scores(
            &[mat("a", "b", BothBad)],
            &EloParams {
                config: EloConfig::Custom,
                permutations: 1,
                ..EloParams::default()
            },
        )
        .unwrap();
        assert_eq!((one[0].elo, one[1].elo), (984.0, 984.0));
    }

    #[test]
    fn parameter_checks() {
        let ms = [mat("a", "b", Tie)];
        for bad in [
            EloParams {
                k_factor: 0.0,
                ..EloParams::default()
            },
            EloParams {
                permutations: 0,
                ..EloParams::default()
            },
        ] {
            assert!(elo_scores(&ms, &bad).is_err());
        }
    }
}

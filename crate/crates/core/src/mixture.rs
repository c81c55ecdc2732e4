//! Data-mixture planning: per-source sampling weights, token targets and
//! epochs (upsampling factors) for language and domain targets.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Domain, Origin};
use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    #[serde(alias = "ar")]
    Arabic,
    #[serde(alias = "en")]
    English,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Arabic => "arabic",
            Language::English => "english",
        }
    }
}

impl std::str::FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ar" | "arabic" => Ok(Language::Arabic),
            "en" | "english" => Ok(Language::English),
            other => Err(Error::InvalidParameter(format!(
                "unknown language {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub name: String,
    pub language: Language,
    #[serde(default)]
    pub origin: Origin,
    pub domain: Domain,
    pub available_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub name: String,
    pub language: Language,
    pub origin: Origin,
    pub domain: Domain,
    pub available_tokens: u64,
    pub target_tokens: u64,
    pub weight: f64,
    /// `target_tokens / available_tokens`; above 1 means the source is
    /// repeated, below 1 that it is subsampled.
    pub epochs: f64,
}

impl PlanEntry {
    pub fn is_upsampled(&self) -> bool {
        self.epochs > 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePlan {
    pub total_tokens: u64,
    /// Sorted by source name.
    pub entries: Vec<PlanEntry>,
    /// Share of `total_tokens` per `language:<name>` and `domain:<name>` key.
    pub realized_shares: BTreeMap<String, f64>,
}

impl MixturePlan {
    pub fn entry(&self, name: &str) -> Option<&PlanEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

pub fn language_key(l: Language) -> String {
    format!("language:{}", l.as_str())
}

pub fn domain_key(d: Domain) -> String {
    format!("domain:{}", d.as_str())
}

/// Plans a mixture of `total_tokens`.
///
/// Language targets are met exactly. Within a language, domain targets (if
/// given) are renormalized over the domains that language has sources for;
/// otherwise sources are weighted by available tokens. Sources sharing a
/// language and domain split their share by available tokens. Integer
/// rounding residue goes to the largest-weight entry so the targets sum to
/// `total_tokens` exactly.
pub fn plan_mixture(
    sources: &[SourceSpec],
    language_targets: &BTreeMap<Language, f64>,
    domain_targets: Option<&BTreeMap<Domain, f64>>,
    total_tokens: u64,
) -> Result<MixturePlan> {
    if total_tokens == 0 {
        return Err(Error::InvalidParameter(
            "total_tokens must be positive".into(),
        ));
    }
    if sources.is_empty() {
        return Err(Error::InvalidParameter("no sources".into()));
    }
    let mut names = HashSet::new();
    for s in sources {
        if !names.insert(s.name.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "duplicate source name {:?}",
                s.name
            )));
        }
        if s.available_tokens == 0 {
            return Err(Error::InvalidParameter(format!(
                "source {:?} has no available tokens",
                s.name
            )));
        }
    }
    check_fractions("language", language_targets.values())?;
    if let Some(d) = domain_targets {
        check_fractions("domain", d.values())?;
    }

    let mut sorted: Vec<&SourceSpec> = sources.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));

    for (&lang, &t) in language_targets {
        if t > 0.0 && !sorted.iter().any(|s| s.language == lang) {
            return Err(Error::InfeasibleTarget(format!(
                "language {} has target {t} but no sources",
                lang.as_str()
            )));
        }
    }
    if let Some(dt) = domain_targets {
        for (&dom, &t) in dt {
            if t > 0.0 && !sorted.iter().any(|s| s.domain == dom) {
                return Err(Error::InfeasibleTarget(format!(
                    "domain {} has target {t} but no sources",
                    dom.as_str()
                )));
            }
        }
    }

    let mut weights = vec![0f64; sorted.len()];
    for (&lang, &lang_target) in language_targets {
        if lang_target == 0.0 {
            continue;
        }
        let members: Vec<usize> = (0..sorted.len())
            .filter(|&i| sorted[i].language == lang)
            .collect();
        match domain_targets {
            None => {
                let avail: f64 = members
                    .iter()
                    .map(|&i| sorted[i].available_tokens as f64)
                    .sum();
                for &i in &members {
                    weights[i] = lang_target * sorted[i].available_tokens as f64 / avail;
                }
            }
            Some(dt) => {
                let domains: BTreeSet<Domain> = members.iter().map(|&i| sorted[i].domain).collect();
                let norm: f64 = domains
                    .iter()
                    .map(|d| dt.get(d).copied().unwrap_or(0.0))
                    .sum();
                if norm <= 0.0 {
                    return Err(Error::InfeasibleTarget(format!(
                        "language {} has target {lang_target} but none of its domains has a positive domain target",
                        lang.as_str()
                    )));
                }
                for d in domains {
                    let share = lang_target * dt.get(&d).copied().unwrap_or(0.0) / norm;
                    let group: Vec<usize> = members
                        .iter()
                        .copied()
                        .filter(|&i| sorted[i].domain == d)
                        .collect();
                    let avail: f64 = group
                        .iter()
                        .map(|&i| sorted[i].available_tokens as f64)
                        .sum();
                    for i in group {
                        weights[i] = share * sorted[i].available_tokens as f64 / avail;
                    }
                }
            }
        }
    }

    let targets = apportion(&weights, total_tokens);
    let entries: Vec<PlanEntry> = sorted
        .iter()
        .zip(weights.iter().zip(&targets))
        .map(|(s, (&weight, &target))| PlanEntry {
            name: s.name.clone(),
            language: s.language,
            origin: s.origin,
            domain: s.domain,
            available_tokens: s.available_tokens,
            target_tokens: target,
            weight,
            epochs: target as f64 / s.available_tokens as f64,
        })
        .collect();
    let realized_shares = shares(
        entries
            .iter()
            .map(|e| (e.language, e.domain, e.target_tokens as f64)),
    );
    Ok(MixturePlan {
        total_tokens,
        entries,
        realized_shares,
    })
}

/// One plan per `(arabic_fraction, english_fraction)` pair, in input order.
pub fn plan_grid(
    sources: &[SourceSpec],
    ratios: &[(f64, f64)],
    total_tokens: u64,
) -> Result<Vec<MixturePlan>> {
    ratios
        .iter()
        .map(|&(ar, en)| {
            let targets = BTreeMap::from([(Language::Arabic, ar), (Language::English, en)]);
            plan_mixture(sources, &targets, None, total_tokens)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareDeviation {
    pub key: String,
    pub target: f64,
    pub realized: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestReport {
    pub deviations: Vec<ShareDeviation>,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares token counts actually sampled per source against the plan's
/// language and domain shares.
pub fn verify_manifest(
    plan: &MixturePlan,
    sampled_counts: &BTreeMap<String, u64>,
    tolerance: f64,
) -> Result<ManifestReport> {
    for name in sampled_counts.keys() {
        if plan.entry(name).is_none() {
            return Err(Error::UnknownSource(name.clone()));
        }
    }
    let mut rows = Vec::with_capacity(plan.entries.len());
    for e in &plan.entries {
        let n = *sampled_counts
            .get(&e.name)
            .ok_or_else(|| Error::MissingSource(e.name.clone()))?;
        rows.push((e.language, e.domain, n as f64));
    }
    if rows.iter().all(|r| r.2 == 0.0) {
        return Err(Error::InvalidParameter(
            "all sampled counts are zero".into(),
        ));
    }
    let realized = shares(rows.into_iter());
    let deviations: Vec<ShareDeviation> = plan
        .realized_shares
        .iter()
        .map(|(key, &target)| {
            let r = realized.get(key).copied().unwrap_or(0.0);
            ShareDeviation {
                key: key.clone(),
                target,
                realized: r,
                deviation: (r - target).abs(),
            }
        })
        .collect();
    let max_deviation = deviations.iter().map(|d| d.deviation).fold(0.0, f64::max);
    Ok(ManifestReport {
        passed: max_deviation <= tolerance,
        deviations,
        max_deviation,
        tolerance,
    })
}

fn check_fractions<'a>(what: &str, values: impl Iterator<Item = &'a f64>) -> Result<()> {
    let mut sum = 0.0;
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "{what} target {v} outside [0, 1]"
            )));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "{what} targets sum to {sum}, not 1"
        )));
    }
    Ok(())
}

/// Rounds `weights * total` to integers summing to `total`; the residue goes
/// to the first entry with the largest weight.
fn apportion(weights: &[f64], total: u64) -> Vec<u64> {
    let mut out: Vec<u64> = weights
        .iter()
        .map(|w| (w * total as f64).round() as u64)
        .collect();
    let assigned: i128 = out.iter().map(|&v| v as i128).sum();
    let residue = total as i128 - assigned;
    if residue != 0 {
        let largest = weights
            .iter()
            .enumerate()
            .fold(0, |best, (i, &w)| if w > weights[best] { i } else { best });
        out[largest] = (out[largest] as i128 + residue) as u64;
    }
    out
}

fn shares(rows: impl Iterator<Item = (Language, Domain, f64)>) -> BTreeMap<String, f64> {
    let mut by_key: BTreeMap<String, f64> = BTreeMap::new();
    let mut total = 0.0;
    for (l, d, n) in rows {
        *by_key.entry(language_key(l)).or_default() += n;
        *by_key.entry(domain_key(d)).or_default() += n;
        total += n;
    }
    for v in by_key.values_mut() {
        *v /= total;
    }
    by_key
}

#[cfg(test)]
mod tests {
    use super::*;

    const B: u64 = 1_000_000_000;

    fn src(
        name: &str,
        language: Language,
        origin: Origin,
        domain: Domain,
        tokens: u64,
    ) -> SourceSpec {
        SourceSpec {
            name: name.into(),
            language,
            origin,
            domain,
            available_tokens: tokens,
        }
    }

    fn lang_targets(ar: f64, en: f64) -> BTreeMap<Language, f64> {
        BTreeMap::from([(Language::Arabic, ar), (Language::English, en)])
    }

    fn three_sources() -> Vec<SourceSpec> {
        vec![
            src(
                "en",
                Language::English,
                Origin::Natural,
                Domain::Web,
                660 * B,
            ),
            src(
                "ar-natural",
                Language::Arabic,
                Origin::Natural,
                Domain::Web,
                270 * B,
            ),
            src(
                "ar-translated",
                Language::Arabic,
                Origin::Translated,
                Domain::Web,
                270 * B,
            ),
        ]
    }

    #[test]
    fn table_one_language_mix() {
        let plan =
            plan_mixture(&three_sources(), &lang_targets(0.45, 0.55), None, 1200 * B).unwrap();
        assert_eq!(plan.entry("en").unwrap().target_tokens, 660 * B);
        assert_eq!(plan.entry("ar-natural").unwrap().target_tokens, 270 * B);
        assert_eq!(plan.entry("ar-translated").unwrap().target_tokens, 270 * B);
        for e in &plan.entries {
            assert_eq!(e.epochs, 1.0);
            assert!(!e.is_upsampled());
        }
        assert!((plan.realized_shares["language:english"] - 0.55).abs() < 1e-12);
    }

    #[test]
    fn single_source_takes_everything() {
        let s = [src(
            "only",
            Language::Arabic,
            Origin::Natural,
            Domain::Web,
            1000,
        )];
        let plan = plan_mixture(&s, &lang_targets(1.0, 0.0), None, 1000).unwrap();
        assert_eq!(plan.entries[0].weight, 1.0);
        assert_eq!(plan.entries[0].epochs, 1.0);
    }

    #[test]
    fn upsampling_epochs() {
        let s = [src(
            "small",
            Language::Arabic,
            Origin::Natural,
            Domain::Web,
            100,
        )];
        let plan = plan_mixture(&s, &lang_targets(1.0, 0.0), None, 250).unwrap();
        assert_eq!(plan.entries[0].target_tokens, 250);
        assert_eq!(plan.entries[0].epochs, 2.5);
        assert!(plan.entries[0].is_upsampled());
    }

    #[test]
    fn residue_goes_to_largest_entry() {
        let s = [
            src("a", Language::Arabic, Origin::Natural, Domain::Web, 1),
            src("b", Language::Arabic, Origin::Natural, Domain::Books, 1),
            src("c", Language::Arabic, Origin::Natural, Domain::News, 1),
        ];
        let plan = plan_mixture(&s, &lang_targets(1.0, 0.0), None, 100).unwrap();
        let t: Vec<u64> = plan.entries.iter().map(|e| e.target_tokens).collect();
        assert_eq!(t, vec![34, 33, 33]);
    }

    #[test]
    fn infeasible_and_invalid_targets() {
        let s = [src(
            "en",
            Language::English,
            Origin::Natural,
            Domain::Web,
            10,
        )];
        let err = plan_mixture(&s, &lang_targets(0.5, 0.5), None, 10).unwrap_err();
        assert!(matches!(err, Error::InfeasibleTarget(m) if m.contains("arabic")));
        assert!(plan_mixture(&s, &lang_targets(0.5, 0.6), None, 10).is_err());
        assert!(plan_mixture(&s, &lang_targets(0.0, 1.0), None, 0).is_err());
        let domains = BTreeMap::from([(Domain::Code, 1.0)]);
        let err = plan_mixture(&s, &lang_targets(0.0, 1.0), Some(&domains), 10).unwrap_err();
        assert!(matches!(err, Error::InfeasibleTarget(m) if m.contains("code")));
    }

    #[test]
    fn domain_targets_renormalize_within_language() {
        let s = [
            src(
                "en-web",
                Language::English,
                Origin::Natural,
                Domain::Web,
                100,
            ),
            src(
                "en-code",
                Language::English,
                Origin::Natural,
                Domain::Code,
                100,
            ),
            src(
                "ar-web",
                Language::Arabic,
                Origin::Natural,
                Domain::Web,
                100,
            ),
        ];
        let domains = BTreeMap::from([(Domain::Web, 0.5), (Domain::Code, 0.5)]);
        let plan = plan_mixture(&s, &lang_targets(0.4, 0.6), Some(&domains), 1000).unwrap();
        // Arabic has only web, so it keeps its whole 40%.
        assert_eq!(plan.entry("ar-web").unwrap().target_tokens, 400);
        assert_eq!(plan.entry("en-web").unwrap().target_tokens, 300);
        assert_eq!(plan.entry("en-code").unwrap().target_tokens, 300);
    }

    #[test]
    fn grid_follows_ratio_order() {
        let ratios = [(0.0, 1.0), (0.45, 0.55), (0.9, 0.1)];
        let plans = plan_grid(&three_sources(), &ratios, 1200 * B).unwrap();
        assert_eq!(plans.len(), 3);
        assert_eq!(plans[0].entry("ar-natural").unwrap().weight, 0.0);
        assert_eq!(plans[1].entry("en").unwrap().target_tokens, 660 * B);
        let ar: Vec<f64> = plans
            .iter()
            .map(|p| p.realized_shares["language:arabic"])
            .collect();
        assert!(ar.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn manifest_deviation() {
        let plan =
            plan_mixture(&three_sources(), &lang_targets(0.45, 0.55), None, 1200 * B).unwrap();
        let exact: BTreeMap<String, u64> = plan
            .entries
            .iter()
            .map(|e| (e.name.clone(), e.target_tokens))
            .collect();
        let r = verify_manifest(&plan, &exact, 1e-12).unwrap();
        assert!(r.passed);
        assert!(r.max_deviation < 1e-12);

        // English 10% short: 594 / 1134 realized vs 0.55 planned.
        let mut short = exact.clone();
        short.insert("en".into(), 594 * B);
        let r = verify_manifest(&plan, &short, 0.01).unwrap();
        let en = r
            .deviations
            .iter()
            .find(|d| d.key == "language:english")
            .unwrap();
        assert!((en.deviation - (0.55 - 594.0 / 1134.0)).abs() < 1e-12);
        assert!(!r.passed);

        let mut unknown = exact.clone();
        unknown.insert("fr".into(), 1);
        assert!(matches!(
            verify_manifest(&plan, &unknown, 0.1),
            Err(Error::UnknownSource(_))
        ));
        let mut missing = exact;
        missing.remove("en");
        assert!(matches!(
            verify_manifest(&plan, &missing, 0.1),
            Err(Error::MissingSource(_))
        ));
    }
}

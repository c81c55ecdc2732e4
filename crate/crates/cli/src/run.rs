use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use langexp_core::arena::{
    aggregate_votes, elo_scores, win_rates, EloConfig, EloParams, MatchResult, VoteRecord,
};
use langexp_core::augment::{augment_all, ChatTemplate};
use langexp_core::corpus::{default_stopwords, run_pipeline, Document, Domain, FilterConfig};
use langexp_core::embed::{expand_embeddings, load_matrix, save_matrix, InitMode};
use langexp_core::io::{atomic_write, read_json, read_jsonl, to_json_pretty, to_jsonl};
use langexp_core::mixture::{
    plan_grid, plan_mixture, verify_manifest, Language, MixturePlan, SourceSpec,
};
use langexp_core::pref::{audit_noise, build_triplets, PrefSeed, PrefTriplet};
use langexp_core::sft::{
    dedup_near, flag_noise, quality_metrics, DedupMode, NoiseConfig, SftSample,
    RULE_EMPTY_RESPONSE, RULE_ROLE_VIOLATION, RULE_UNBALANCED_MARKUP,
};
use langexp_core::tok::{fertility, merge_tokenizers, train_bpe, TokenizerModel, TrainConfig};
use log::info;
use serde::Serialize;

use crate::args::*;
use crate::config::FileConfig;
use crate::failure::Failure;

type Outcome = Result<(), Failure>;

pub fn dispatch(command: Command, cfg: &FileConfig) -> Outcome {
    match command {
        Command::Tok(c) => match c {
            TokCommand::Train(a) => tok_train(a, cfg),
            TokCommand::Merge(a) => tok_merge(a),
            TokCommand::Encode(a) => tok_encode(a, cfg),
            TokCommand::Fertility(a) => tok_fertility(a, cfg),
        },
        Command::Embed(EmbedCommand::Expand(a)) => embed_expand(a, cfg),
        Command::Corpus(CorpusCommand::Filter(a)) => corpus_filter(a, cfg),
        Command::Mixture(c) => match c {
            MixtureCommand::Plan(a) => mixture_plan(a, cfg),
            MixtureCommand::Grid(a) => mixture_grid(a, cfg),
            MixtureCommand::Verify(a) => mixture_verify(a, cfg),
        },
        Command::Sft(c) => match c {
            SftCommand::Metrics(a) => sft_metrics(a),
            SftCommand::Dedup(a) => sft_dedup(a, cfg),
            SftCommand::Flag(a) => sft_flag(a, cfg),
            SftCommand::Augment(a) => sft_augment(a),
        },
        Command::Pref(c) => match c {
            PrefCommand::Build(a) => pref_build(a, cfg),
            PrefCommand::Audit(a) => pref_audit(a, cfg),
        },
        Command::Arena(c) => match c {
            ArenaCommand::Aggregate(a) => arena_aggregate(a),
            ArenaCommand::Winrates(a) => arena_winrates(a),
            ArenaCommand::Elo(a) => arena_elo(a, cfg),
        },
    }
}

/// Fails before any work when an input is missing or an output directory
/// does not exist.
fn check_paths(inputs: &[&Path], outputs: &[Option<&Path>]) -> Outcome {
    for p in inputs {
        if !p.is_file() {
            return Err(Failure::validation(format!(
                "input file not found: {}",
                p.display()
            )));
        }
    }
    for p in outputs.iter().flatten() {
        let parent = p
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return Err(Failure::validation(format!(
                "output directory not found: {}",
                parent.display()
            )));
        }
    }
    Ok(())
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Outcome {
    match output {
        Some(path) => Ok(atomic_write(path, bytes)?),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::data(format!("stdout: {e}"))),
    }
}

fn emit_json<T: Serialize>(output: Option<&Path>, value: &T) -> Outcome {
    emit(output, &to_json_pretty(value))
}

fn read_texts(path: &Path, field: &str) -> Result<Vec<(String, String)>, Failure> {
    let rows: Vec<serde_json::Value> = read_jsonl(path)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, row)| {
            let text = row.get(field).and_then(|v| v.as_str()).ok_or_else(|| {
                Failure::data(format!(
                    "{}: line {}: no string field {field:?}",
                    path.display(),
                    i + 1
                ))
            })?;
            let id = match row.get("id") {
                Some(serde_json::Value::String(s)) => s.clone(),
                _ => (i + 1).to_string(),
            };
            Ok((id, text.to_string()))
        })
        .collect()
}

fn read_stopwords(path: Option<&Path>) -> Result<HashSet<String>, Failure> {
    match path {
        None => Ok(default_stopwords()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::validation(format!("{}: {e}", p.display())))?;
            Ok(text
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect())
        }
    }
}

fn parse_total(raw: &str) -> Result<u64, Failure> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Failure::validation(format!("total tokens {raw:?} is not a number")))?;
    if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
        return Err(Failure::validation(format!(
            "total tokens {raw:?} is not a whole token count"
        )));
    }
    Ok(v as u64)
}

fn parse_assignments<K: Ord>(
    raw: &str,
    parse_key: impl Fn(&str) -> Result<K, langexp_core::Error>,
) -> Result<BTreeMap<K, f64>, Failure> {
    let mut out = BTreeMap::new();
    for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure::validation(format!("expected key=value, got {item:?}")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| Failure::validation(format!("{item:?}: {v:?} is not a number")))?;
        if out.insert(parse_key(k.trim())?, value).is_some() {
            return Err(Failure::validation(format!("{k:?} given twice")));
        }
    }
    Ok(out)
}

fn tok_train(a: TokTrain, cfg: &FileConfig) -> Outcome {
    const S: &str = "tok.train";
    check_paths(&[&a.input], &[a.out.output.as_deref()])?;
    let field = cfg.pick(a.text_field, S, "text_field", "text".to_string())?;
    let specials = cfg.pick(a.specials, S, "specials", "<s>,</s>".to_string())?;
    let config = TrainConfig {
        vocab_size: cfg.require(a.vocab_size, S, "vocab_size")?,
        specials: specials
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect(),
        sample_docs: cfg.pick_opt(a.sample_docs, S, "sample_docs")?,
        seed: cfg.pick(a.seed, S, "seed", 0)?,
    };
    let docs = read_texts(&a.input, &field)?;
    let texts: Vec<&str> = docs.iter().map(|(_, t)| t.as_str()).collect();
    let model = train_bpe(&texts, &config)?;
    info!(
        "trained {} tokens, {} merges",
        model.vocab_size(),
        model.merges().len()
    );
    emit(a.out.output.as_deref(), model.to_json().as_bytes())
}

fn tok_merge(a: TokMerge) -> Outcome {
    check_paths(&[&a.original, &a.language], &[a.out.output.as_deref()])?;
    let original = TokenizerModel::load(&a.original)?;
    let language = TokenizerModel::load(&a.language)?;
    let merged = merge_tokenizers(&original, &language)?;
    info!(
        "merged vocabulary {} (+{})",
        merged.vocab_size(),
        merged.vocab_size() - original.vocab_size()
    );
    emit(a.out.output.as_deref(), merged.to_json().as_bytes())
}

fn tok_encode(a: TokEncode, cfg: &FileConfig) -> Outcome {
    let mut inputs: Vec<&Path> = vec![&a.model];
    inputs.extend(a.input.as_deref());
    check_paths(&inputs, &[a.out.output.as_deref()])?;
    let model = TokenizerModel::load(&a.model)?;
    if let Some(text) = &a.text {
        let mut bytes = serde_json::to_vec(&model.encode(text)).expect("id list");
        bytes.push(b'\n');
        return emit(a.out.output.as_deref(), &bytes);
    }
    #[derive(Serialize)]
    struct Encoded {
        id: String,
        token_ids: Vec<u32>,
    }
    let field = cfg.pick(a.text_field, "tok.encode", "text_field", "text".to_string())?;
    let path = a.input.as_deref().expect("clap requires --text or --input");
    let rows: Vec<Encoded> = read_texts(path, &field)?
        .into_iter()
        .map(|(id, text)| Encoded {
            token_ids: model.encode(&text),
            id,
        })
        .collect();
    emit(a.out.output.as_deref(), &to_jsonl(&rows))
}

fn tok_fertility(a: TokFertility, cfg: &FileConfig) -> Outcome {
    const S: &str = "tok.fertility";
    check_paths(&[&a.model, &a.input], &[a.out.output.as_deref()])?;
    let field = cfg.pick(a.text_field, S, "text_field", "text".to_string())?;
    let sample_size = cfg.pick(a.sample_size, S, "sample_size", 1000)?;
    let seed = cfg.pick(a.seed, S, "seed", 0)?;
    let corpus_id = a.corpus_id.unwrap_or_else(|| {
        a.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let model = TokenizerModel::load(&a.model)?;
    let docs = read_texts(&a.input, &field)?;
    let texts: Vec<&str> = docs.iter().map(|(_, t)| t.as_str()).collect();
    let report = fertility(&model, &corpus_id, &texts, sample_size, seed)?;
    emit_json(a.out.output.as_deref(), &report)
}

fn embed_expand(a: EmbedExpand, cfg: &FileConfig) -> Outcome {
    const S: &str = "embed.expand";
    check_paths(
        &[&a.matrix, &a.original_tok, &a.merged_tok],
        &[Some(&a.output)],
    )?;
    let mode: InitMode = cfg
        .pick(a.mode, S, "mode", "averaged".to_string())?
        .parse()?;
    let seed = cfg.pick(a.seed, S, "seed", 0)?;
    let matrix = load_matrix(&a.matrix)?;
    let original = TokenizerModel::load(&a.original_tok)?;
    let merged = TokenizerModel::load(&a.merged_tok)?;
    let out = expand_embeddings(&matrix, &original, &merged, mode, seed)?;
    info!("expanded {} -> {} rows", matrix.rows(), out.rows());
    Ok(save_matrix(&out, &a.output)?)
}

fn corpus_filter(a: CorpusFilter, cfg: &FileConfig) -> Outcome {
    const S: &str = "corpus.filter";
    check_paths(&[&a.input], &[a.out.output.as_deref(), a.report.as_deref()])?;
    let defaults = FilterConfig::default();
    let stopwords_path: Option<PathBuf> = cfg.pick_opt(a.stopwords, S, "stopwords")?;
    if let Some(p) = &stopwords_path {
        check_paths(&[p], &[])?;
    }
    let config = FilterConfig {
        lang_threshold: cfg.pick(
            a.lang_threshold,
            S,
            "lang_threshold",
            defaults.lang_threshold,
        )?,
        min_words: cfg.pick(a.min_words, S, "min_words", defaults.min_words)?,
        stopwords: read_stopwords(stopwords_path.as_deref())?,
        max_stopword_ratio: cfg.pick(
            a.max_stopword_ratio,
            S,
            "max_stopword_ratio",
            defaults.max_stopword_ratio,
        )?,
    };
    config.validate()?;
    let docs: Vec<Document> = read_jsonl(&a.input)?;
    let (kept, report) = run_pipeline(docs, &config);
    info!(
        "kept {} of {} documents",
        report.kept_count, report.input_count
    );
    emit(a.out.output.as_deref(), &to_jsonl(&kept))?;
    if let Some(p) = &a.report {
        atomic_write(p, &to_json_pretty(&report))?;
    }
    Ok(())
}

fn mixture_plan(a: MixturePlanArgs, cfg: &FileConfig) -> Outcome {
    const S: &str = "mixture.plan";
    check_paths(&[&a.sources], &[a.out.output.as_deref()])?;
    let total = parse_total(&cfg.require(a.total_tokens, S, "total_tokens")?)?;
    let languages = parse_assignments(&cfg.require(a.lang, S, "lang")?, |k| k.parse::<Language>())?;
    let domains = cfg
        .pick_opt(a.domains, S, "domains")?
        .map(|d| parse_assignments(&d, |k| k.parse::<Domain>()))
        .transpose()?;
    let sources: Vec<SourceSpec> = read_json(&a.sources)?;
    let plan = plan_mixture(&sources, &languages, domains.as_ref(), total)?;
    emit_json(a.out.output.as_deref(), &plan)
}

fn mixture_grid(a: MixtureGrid, cfg: &FileConfig) -> Outcome {
    const S: &str = "mixture.grid";
    check_paths(&[&a.sources], &[a.out.output.as_deref()])?;
    let total = parse_total(&cfg.require(a.total_tokens, S, "total_tokens")?)?;
    let ratios = cfg
        .require(a.ratios, S, "ratios")?
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let bad = || Failure::validation(format!("ratio {pair:?} is not arabic:english"));
            let (ar, en) = pair.split_once(':').ok_or_else(bad)?;
            Ok((
                ar.trim().parse().map_err(|_| bad())?,
                en.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect::<Result<Vec<(f64, f64)>, Failure>>()?;
    let sources: Vec<SourceSpec> = read_json(&a.sources)?;
    let plans = plan_grid(&sources, &ratios, total)?;
    emit_json(a.out.output.as_deref(), &plans)
}

fn mixture_verify(a: MixtureVerify, cfg: &FileConfig) -> Outcome {
    check_paths(&[&a.plan, &a.counts], &[a.out.output.as_deref()])?;
    let tolerance = cfg.pick(a.tolerance, "mixture.verify", "tolerance", 0.005)?;
    let plan: MixturePlan = read_json(&a.plan)?;
    let counts: BTreeMap<String, u64> = read_json(&a.counts)?;
    let report = verify_manifest(&plan, &counts, tolerance)?;
    emit_json(a.out.output.as_deref(), &report)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::check(format!(
            "share deviation {:.6} exceeds tolerance {tolerance}",
            report.max_deviation
        )))
    }
}

fn sft_metrics(a: SftMetrics) -> Outcome {
    let mut inputs: Vec<&Path> = vec![&a.input];
    inputs.extend(a.stopwords.as_deref());
    check_paths(&inputs, &[a.out.output.as_deref()])?;
    let stopwords = read_stopwords(a.stopwords.as_deref())?;
    let samples: Vec<SftSample> = read_jsonl(&a.input)?;
    emit_json(
        a.out.output.as_deref(),
        &quality_metrics(&samples, &stopwords),
    )
}

fn sft_dedup(a: SftDedup, cfg: &FileConfig) -> Outcome {
    const S: &str = "sft.dedup";
    check_paths(
        &[&a.input],
        &[a.out.output.as_deref(), a.dropped.as_deref()],
    )?;
    let mode: DedupMode = cfg
        .pick(a.mode, S, "mode", "normalized_exact".to_string())?
        .parse()?;
    let threshold = cfg.pick(a.threshold, S, "threshold", 0.9)?;
    let samples: Vec<SftSample> = read_jsonl(&a.input)?;
    let out = dedup_near(samples, mode, threshold)?;
    info!("kept {}, dropped {}", out.kept.len(), out.dropped.len());
    emit(a.out.output.as_deref(), &to_jsonl(&out.kept))?;
    if let Some(p) = &a.dropped {
        atomic_write(p, &to_json_pretty(&out.dropped))?;
    }
    Ok(())
}

fn noise_config(
    cfg: &FileConfig,
    section: &str,
    disable: Option<String>,
    bracket_tolerance: Option<usize>,
    length_percentile: Option<f64>,
) -> Result<NoiseConfig, Failure> {
    let defaults = NoiseConfig::default();
    let mut config = NoiseConfig {
        bracket_tolerance: cfg.pick(
            bracket_tolerance,
            section,
            "bracket_tolerance",
            defaults.bracket_tolerance,
        )?,
        length_outlier_percentile: cfg.pick_opt(length_percentile, section, "length_percentile")?,
        ..defaults
    };
    let disable: Option<String> = cfg.pick_opt(disable, section, "disable")?;
    for rule in disable
        .iter()
        .flat_map(|d| d.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
    {
        match rule {
            RULE_EMPTY_RESPONSE => config.empty_response = false,
            RULE_ROLE_VIOLATION => config.role_violation = false,
            RULE_UNBALANCED_MARKUP => config.unbalanced_markup = false,
            other => return Err(Failure::validation(format!("unknown rule {other:?}"))),
        }
    }
    config.validate()?;
    Ok(config)
}

fn sft_flag(a: SftFlag, cfg: &FileConfig) -> Outcome {
    check_paths(&[&a.input], &[a.out.output.as_deref()])?;
    let config = noise_config(
        cfg,
        "sft.flag",
        a.disable,
        a.bracket_tolerance,
        a.length_percentile,
    )?;
    let samples: Vec<SftSample> = read_jsonl(&a.input)?;
    emit_json(a.out.output.as_deref(), &flag_noise(&samples, &config)?)
}

fn sft_augment(a: SftAugment) -> Outcome {
    let mut inputs: Vec<&Path> = vec![&a.input, &a.tokenizer];
    inputs.extend(a.template.as_deref());
    check_paths(&inputs, &[a.out.output.as_deref()])?;
    let template: ChatTemplate = match &a.template {
        Some(p) => read_json(p)?,
        None => ChatTemplate::default(),
    };
    let tok = TokenizerModel::load(&a.tokenizer)?;
    template.special_ids(&tok)?;
    let samples: Vec<SftSample> = read_jsonl(&a.input)?;
    let out = augment_all(&samples, &template, &tok)?;
    info!("{} conversations -> {} samples", samples.len(), out.len());
    emit(a.out.output.as_deref(), &to_jsonl(&out))
}

fn pref_build(a: PrefBuild, cfg: &FileConfig) -> Outcome {
    check_paths(&[&a.input], &[a.out.output.as_deref(), a.report.as_deref()])?;
    let config = noise_config(cfg, "pref.build", None, a.bracket_tolerance, None)?;
    let seeds: Vec<PrefSeed> = read_jsonl(&a.input)?;
    let (triplets, report) = build_triplets(&seeds, &config)?;
    info!(
        "{} candidates -> {} triplets",
        report.candidate_count, report.triplet_count
    );
    emit(a.out.output.as_deref(), &to_jsonl(&triplets))?;
    if let Some(p) = &a.report {
        atomic_write(p, &to_json_pretty(&report))?;
    }
    Ok(())
}

fn pref_audit(a: PrefAudit, cfg: &FileConfig) -> Outcome {
    const S: &str = "pref.audit";
    check_paths(&[&a.input], &[a.out.output.as_deref()])?;
    let tolerance = cfg.pick(a.tolerance, S, "tolerance", 0.001)?;
    let config = noise_config(cfg, S, None, a.bracket_tolerance, None)?;
    let triplets: Vec<PrefTriplet> = read_jsonl(&a.input)?;
    let report = audit_noise(&triplets, tolerance, &config)?;
    emit_json(a.out.output.as_deref(), &report)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::check(format!(
            "{} of {} triplets flagged ({:.4}), above tolerance {tolerance}",
            report.flagged_count, report.total, report.flagged_fraction
        )))
    }
}

fn arena_aggregate(a: ArenaAggregate) -> Outcome {
    check_paths(
        &[&a.input],
        &[a.out.output.as_deref(), a.pending.as_deref()],
    )?;
    let votes: Vec<VoteRecord> = read_jsonl(&a.input)?;
    let (matches, pending) = aggregate_votes(&votes)?;
    info!("{} matches, {} pending", matches.len(), pending.len());
    emit(a.out.output.as_deref(), &to_jsonl(&matches))?;
    if let Some(p) = &a.pending {
        atomic_write(p, &to_jsonl(&pending))?;
    }
    Ok(())
}

fn arena_winrates(a: ArenaWinrates) -> Outcome {
    check_paths(&[&a.input], &[a.out.output.as_deref()])?;
    let matches: Vec<MatchResult> = read_jsonl(&a.input)?;
    emit_json(a.out.output.as_deref(), &win_rates(&matches))
}

fn arena_elo(a: ArenaElo, cfg: &FileConfig) -> Outcome {
    const S: &str = "arena.elo";
    check_paths(&[&a.input], &[a.out.output.as_deref()])?;
    let d = EloParams::default();
    let config: EloConfig = cfg
        .pick(a.config, S, "config", "default".to_string())?
        .parse()?;
    let params = EloParams {
        config,
        k_factor: cfg.pick(a.k, S, "k", d.k_factor)?,
        initial: cfg.pick(a.initial, S, "initial", d.initial)?,
        permutations: cfg.pick(a.permutations, S, "permutations", d.permutations)?,
        seed: cfg.pick(a.seed, S, "seed", d.seed)?,
    };
    let matches: Vec<MatchResult> = read_jsonl(&a.input)?;
    emit_json(a.out.output.as_deref(), &elo_scores(&matches, &params)?)
}

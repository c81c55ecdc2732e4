use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "langexp",
    version,
    about = "Tokenizer, data and evaluation tooling for adapting language models to a new language"
)]
pub struct Cli {
    /// TOML file supplying defaults, e.g. `seed = 7` or `[corpus.filter] min_words = 30`.
    #[arg(long, global = true, value_name = "PATH")]
    pub config_file: Option<PathBuf>,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenizer training, merging, encoding and fertility.
    #[command(subcommand)]
    Tok(TokCommand),
    /// Embedding-matrix expansion.
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Pretraining document filters.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Data-mixture planning.
    #[command(subcommand)]
    Mixture(MixtureCommand),
    /// SFT metrics, deduplication, noise flags and turn augmentation.
    #[command(subcommand)]
    Sft(SftCommand),
    /// Preference triplets.
    #[command(subcommand)]
    Pref(PrefCommand),
    /// Human-evaluation aggregation and ratings.
    #[command(subcommand)]
    Arena(ArenaCommand),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file, written atomically. Standard output when omitted.
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TokCommand {
    /// Train a byte-fallback BPE tokenizer on JSONL documents.
    Train(TokTrain),
    /// Append a language-specific tokenizer's novel tokens and merges to an original one.
    Merge(TokMerge),
    /// Encode text with a tokenizer.
    Encode(TokEncode),
    /// Tokens per word on a document sample.
    Fertility(TokFertility),
}

#[derive(Debug, Args)]
pub struct TokTrain {
    /// JSONL documents.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Field holding the document text.
    #[arg(long)]
    pub text_field: Option<String>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// Comma-separated special tokens.
    #[arg(long)]
    pub specials: Option<String>,
    /// Train on a random subset of this many documents.
    #[arg(long)]
    pub sample_docs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct TokMerge {
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub language: PathBuf,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct TokEncode {
    #[arg(short, long)]
    pub model: PathBuf,
    /// Text to encode; prints a JSON array of ids.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    pub text: Option<String>,
    /// JSONL documents; writes one {id, token_ids} line each.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub text_field: Option<String>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct TokFertility {
    #[arg(short, long)]
    pub model: PathBuf,
    /// JSONL documents.
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long)]
    pub text_field: Option<String>,
    /// Name recorded in the report; defaults to the input file stem.
    #[arg(long)]
    pub corpus_id: Option<String>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Subcommand)]
pub enum EmbedCommand {
    /// Add rows for tokens the merged tokenizer introduced.
    Expand(EmbedExpand),
}

#[derive(Debug, Args)]
pub struct EmbedExpand {
    /// Original embedding matrix (EMB1 format).
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub original_tok: PathBuf,
    #[arg(long)]
    pub merged_tok: PathBuf,
    /// averaged or random.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output matrix path.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Language, length, URL/stopword and exact-duplicate filters in one pass.
    Filter(CorpusFilter),
}

#[derive(Debug, Args)]
pub struct CorpusFilter {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Sidecar JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub min_words: Option<usize>,
    #[arg(long)]
    pub lang_threshold: Option<f64>,
    #[arg(long)]
    pub max_stopword_ratio: Option<f64>,
    /// Stopword list, one term per line; the built-in Arabic+English list otherwise.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Subcommand)]
pub enum MixtureCommand {
    /// Plan one mixture.
    Plan(MixturePlanArgs),
    /// Plan one mixture per Arabic/English ratio.
    Grid(MixtureGrid),
    /// Compare sampled token counts against a plan.
    Verify(MixtureVerify),
}

#[derive(Debug, Args)]
pub struct MixturePlanArgs {
    /// JSON array of sources.
    #[arg(long)]
    pub sources: PathBuf,
    /// Total tokens; scientific notation accepted (1.2e12).
    #[arg(long)]
    pub total_tokens: Option<String>,
    /// Language targets, e.g. ar=0.45,en=0.55.
    #[arg(long)]
    pub lang: Option<String>,
    /// Optional domain targets, e.g. web=0.5,code=0.5.
    #[arg(long)]
    pub domains: Option<String>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct MixtureGrid {
    #[arg(long)]
    pub sources: PathBuf,
    #[arg(long)]
    pub total_tokens: Option<String>,
    /// Arabic:English pairs, e.g. 0.1:0.9,0.45:0.55.
    #[arg(long)]
    pub ratios: Option<String>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct MixtureVerify {
    #[arg(long)]
    pub plan: PathBuf,
    /// JSON object mapping source name to sampled token count.
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Subcommand)]
pub enum SftCommand {
    /// Word counts, lexical diversity and turn histogram.
    Metrics(SftMetrics),
    /// Near-exact deduplication.
    Dedup(SftDedup),
    /// Flag noisy samples.
    Flag(SftFlag),
    /// Expand conversations into per-turn training samples.
    Augment(SftAugment),
}

#[derive(Debug, Args)]
pub struct SftMetrics {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct SftDedup {
    #[arg(short, long)]
    pub input: PathBuf,
    /// normalized_exact or ngram_jaccard.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Where to write the dropped ids as a JSON array.
    #[arg(long)]
    pub dropped: Option<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct SftFlag {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Rules to disable, comma-separated.
    #[arg(long)]
    pub disable: Option<String>,
    #[arg(long)]
    pub bracket_tolerance: Option<usize>,
    /// Enable the length-outlier rule at this response-length percentile.
    #[arg(long)]
    pub length_percentile: Option<f64>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct SftAugment {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long)]
    pub tokenizer: PathBuf,
    /// Chat template JSON; built-in defaults otherwise.
    #[arg(long)]
    pub template: Option<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Subcommand)]
pub enum PrefCommand {
    /// Build filtered (prompt, chosen, rejected) triplets from seeds.
    Build(PrefBuild),
    /// Re-validate triplets; exits 2 when the flagged share exceeds the tolerance.
    Audit(PrefAudit),
}

#[derive(Debug, Args)]
pub struct PrefBuild {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub bracket_tolerance: Option<usize>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct PrefAudit {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub bracket_tolerance: Option<usize>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Subcommand)]
pub enum ArenaCommand {
    /// Majority-vote verdict groups into matches.
    Aggregate(ArenaAggregate),
    /// Win/loss/tie/both-bad fractions per model pair.
    Winrates(ArenaWinrates),
    /// ELO ratings averaged over seeded match orderings.
    Elo(ArenaElo),
}

#[derive(Debug, Args)]
pub struct ArenaAggregate {
    /// Vote JSONL.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Where to write groups still waiting for a fourth vote.
    #[arg(long)]
    pub pending: Option<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct ArenaWinrates {
    /// Match JSONL.
    #[arg(short, long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct ArenaElo {
    /// Match JSONL.
    #[arg(short, long)]
    pub input: PathBuf,
    /// default or custom.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub initial: Option<f64>,
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: Output,
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library.
///
/// Variants fall into two families that the CLI maps onto distinct exit
/// codes: invalid parameters or preconditions ([`Error::is_validation`]) and
/// malformed or inconsistent data (everything else).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("vocabulary size {requested} is below the minimum {minimum} (256 byte tokens + {specials} specials)")]
    VocabTooSmall {
        requested: usize,
        minimum: usize,
        specials: usize,
    },

    #[error("invalid tokenizer model: {0}")]
    InvalidModel(String),

    #[error("special token {surface:?} conflicts between tokenizers: {detail}")]
    SpecialConflict { surface: String, detail: String },

    #[error("token id {id} out of range for vocabulary of {vocab_size}")]
    IdOutOfRange { id: u32, vocab_size: usize },

    #[error("no words in the sampled documents")]
    NoWords,

    #[error("embedding shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite embedding value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("bad magic bytes in matrix file (expected \"EMB1\")")]
    BadMagic,

    #[error("matrix file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("matrix dimensions {rows}x{dim} overflow")]
    DimensionOverflow { rows: u64, dim: u64 },

    #[error("matrix file has {0} trailing bytes")]
    TrailingData(u64),

    #[error("infeasible mixture target: {0}")]
    InfeasibleTarget(String),

    #[error("unknown source in counts: {0}")]
    UnknownSource(String),

    #[error("missing count for source: {0}")]
    MissingSource(String),

    #[error("invalid conversation {id}: {reason}")]
    InvalidConversation { id: String, reason: String },

    #[error("special token {0:?} is not atomic under the tokenizer")]
    NonAtomicSpecial(String),

    #[error(
        "assistant turn {turn} of {id} is empty; run the noise flagger to remove such samples"
    )]
    EmptyAssistantTurn { id: String, turn: usize },

    #[error("rendered sample {id} has {len} tokens, above the limit of {max}")]
    TooLong { id: String, len: usize, max: usize },

    #[error("invalid preference seed {id}: {reason}")]
    InvalidSeed { id: String, reason: String },

    #[error("invalid vote group {group}: {reason}")]
    InvalidVoteGroup { group: String, reason: String },

    #[error("{path}: line {line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad parameters or unmet preconditions, as
    /// opposed to malformed input data.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::VocabTooSmall { .. }
                | Error::Io { .. }
                | Error::NonAtomicSpecial(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

//! Byte-fallback BPE tokenizers: training, merging, encoding and fertility.

mod codec;
mod fertility;
mod merge;
mod model;
mod pretok;
mod train;

pub use codec::Decoded;
pub use fertility::{fertility, FertilityReport};
pub use merge::merge_tokenizers;
pub use model::{byte_surface, TokenKind, TokenizerModel, FORMAT_VERSION, METASPACE};
pub use pretok::{pre_tokenize, Piece};
pub use train::{train_bpe, TrainConfig};

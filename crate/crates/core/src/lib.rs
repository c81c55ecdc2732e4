//! Deterministic data and vocabulary procedures for adapting a pretrained
//! language model to a new language.
//!
//! - [`tok`]: byte-fallback BPE training, tokenizer merging, fertility
//! - [`embed`]: embedding-matrix expansion for merged vocabularies
//! - [`corpus`]: pretraining document filters and exact deduplication
//! - [`mixture`]: language/domain mixture planning
//! - [`sft`]: SFT quality metrics, near-duplicate removal, noise flags
//! - [`augment`]: per-turn sample expansion with loss masks
//! - [`pref`]: preference triplet construction and audit
//! - [`arena`]: vote aggregation, win rates and ELO

pub mod arena;
pub mod augment;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod io;
pub mod mixture;
pub mod pref;
pub mod sft;
pub mod text;
pub mod tok;

pub use error::{Error, Result};

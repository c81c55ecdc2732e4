use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::TokenizerModel;
use crate::error::{Error, Result};
use crate::text::word_count;

/// Tokens per whitespace-delimited word over a seeded document sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FertilityReport {
    pub corpus_id: String,
    pub token_count: u64,
    pub word_count: u64,
    pub fertility: f64,
    pub sample_seed: u64,
    pub sample_size: usize,
}

/// Measures fertility on `sample_size` documents drawn uniformly without
/// replacement. When the corpus is no larger than the sample, every document
/// is used.
pub fn fertility<S: AsRef<str>>(
    model: &TokenizerModel,
    corpus_id: &str,
    corpus: &[S],
    sample_size: usize,
    seed: u64,
) -> Result<FertilityReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let picked: Vec<usize> = if sample_size < corpus.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = index::sample(&mut rng, corpus.len(), sample_size).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..corpus.len()).collect()
    };

    let (mut tokens, mut words) = (0u64, 0u64);
    for &i in &picked {
        let doc = corpus[i].as_ref();
        tokens += model.count_tokens(doc) as u64;
        words += word_count(doc) as u64;
    }
    if words == 0 {
        return Err(Error::NoWords);
    }
    Ok(FertilityReport {
        corpus_id: corpus_id.to_string(),
        token_count: tokens,
        word_count: words,
        fertility: tokens as f64 / words as f64,
        sample_seed: seed,
        sample_size: picked.len(),
    })
}

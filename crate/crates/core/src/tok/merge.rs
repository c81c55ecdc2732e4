use std::collections::HashSet;

use super::model::{TokenKind, TokenizerModel};
use crate::error::{Error, Result};

/// Extends `original` with every token of `language_specific` it lacks.
///
/// Original ids are preserved. New tokens are appended in the
/// language-specific model's id order, and its merges are appended after the
/// original merges, skipping pairs the original already has. Because the
/// original merges keep the lowest ranks, text the original tokenizer handles
/// is segmented the same way unless a novel merge applies to it.
pub fn merge_tokenizers(
    original: &TokenizerModel,
    language_specific: &TokenizerModel,
) -> Result<TokenizerModel> {
    for s in original.specials() {
        if let Some(id) = language_specific.id(s) {
            if language_specific.kind(id) != Some(TokenKind::Special) {
                return Err(Error::SpecialConflict {
                    surface: s.clone(),
                    detail: "special in the original, regular token in the language-specific model"
                        .into(),
                });
            }
        }
    }

    let mut tokens = original.tokens().to_vec();
    let mut specials = original.specials().to_vec();
    for (id, surface) in language_specific.tokens().iter().enumerate() {
        let lang_kind = language_specific.kind(id as u32).expect("id in range");
        match original.id(surface) {
            Some(orig_id) => {
                let orig_kind = original.kind(orig_id).expect("id in range");
                if (lang_kind == TokenKind::Special) != (orig_kind == TokenKind::Special) {
                    return Err(Error::SpecialConflict {
                        surface: surface.clone(),
                        detail: "special in one tokenizer, regular token in the other".into(),
                    });
                }
            }
            None => {
                if lang_kind == TokenKind::Special {
                    specials.push(surface.clone());
                }
                tokens.push(surface.clone());
            }
        }
    }

    let mut merges = original.merges().to_vec();
    let known: HashSet<&(String, String)> = original.merges().iter().collect();
    merges.extend(
        language_specific
            .merges()
            .iter()
            .filter(|m| !known.contains(m))
            .cloned(),
    );

    TokenizerModel::new(tokens, merges, specials)
}

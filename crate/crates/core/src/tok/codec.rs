use super::model::{TokenKind, TokenizerModel, METASPACE};
use super::pretok::{pre_tokenize, Piece};
use crate::error::{Error, Result};

/// Result of [`TokenizerModel::decode`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub text: String,
    /// Set when the byte tokens did not form valid UTF-8 and replacement
    /// characters were substituted.
    pub lossy: bool,
}

#[derive(Clone, Copy)]
struct Sym {
    id: u32,
    mergeable: bool,
}

impl TokenizerModel {
    /// Encodes `text` into token ids. Total on any UTF-8 input.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for piece in pre_tokenize(text, self.specials()) {
            match piece {
                Piece::Special(i) => {
                    ids.push(self.id(&self.specials()[i]).expect("validated special"))
                }
                Piece::Space => ids.push(self.metaspace_symbol().id),
                Piece::Whitespace(c) => self.push_char(c, &mut ids),
                Piece::Word { metaspace, body } => {
                    let syms = self.word_symbols(metaspace, body);
                    self.apply_merges(syms, &mut ids);
                }
            }
        }
        ids
    }

    /// Encodes a token surface as a single word, the way the surface would
    /// be seen inside encoded text: a leading metaspace marker is treated as
    /// the word-boundary prefix rather than a literal character.
    pub fn encode_surface(&self, surface: &str) -> Vec<u32> {
        let (metaspace, body) = match surface.strip_prefix(METASPACE) {
            Some(rest) => (true, rest),
            None => (false, surface),
        };
        let mut ids = Vec::new();
        let syms = self.word_symbols(metaspace, body);
        self.apply_merges(syms, &mut ids);
        ids
    }

    /// Number of tokens `text` encodes to.
    pub fn count_tokens(&self, text: &str) -> usize {
        self.encode(text).len()
    }

    /// Decodes ids back into text. Exact inverse of [`encode`](Self::encode).
    pub fn decode(&self, ids: &[u32]) -> Result<Decoded> {
        let mut buf: Vec<u8> = Vec::new();
        for &id in ids {
            let kind = self.kind(id).ok_or(Error::IdOutOfRange {
                id,
                vocab_size: self.vocab_size(),
            })?;
            let surface = self.token(id).expect("checked above");
            match kind {
                TokenKind::Special => buf.extend_from_slice(surface.as_bytes()),
                TokenKind::Byte(b) => buf.push(b),
                TokenKind::Learned => {
                    for c in surface.chars() {
                        let c = if c == METASPACE { ' ' } else { c };
                        let mut tmp = [0u8; 4];
                        buf.extend_from_slice(c.encode_utf8(&mut tmp).as_bytes());
                    }
                }
            }
        }
        let strip = ids
            .first()
            .is_some_and(|&id| self.kind(id) != Some(TokenKind::Special))
            && buf.first() == Some(&b' ');
        let bytes = if strip { &buf[1..] } else { &buf[..] };
        Ok(match std::str::from_utf8(bytes) {
            Ok(s) => Decoded {
                text: s.to_string(),
                lossy: false,
            },
            Err(_) => Decoded {
                text: String::from_utf8_lossy(bytes).into_owned(),
                lossy: true,
            },
        })
    }

    fn metaspace_symbol(&self) -> Sym {
        match self.metaspace_id() {
            Some(id) => Sym {
                id,
                mergeable: true,
            },
            None => Sym {
                id: self.byte_id(b' '),
                mergeable: false,
            },
        }
    }

    fn push_char(&self, c: char, ids: &mut Vec<u32>) {
        if c.is_ascii() {
            ids.push(self.byte_id(c as u8));
        } else if let Some(id) = self.char_id(c).filter(|_| c != METASPACE) {
            ids.push(id);
        } else {
            let mut tmp = [0u8; 4];
            ids.extend(c.encode_utf8(&mut tmp).bytes().map(|b| self.byte_id(b)));
        }
    }

    fn word_symbols(&self, metaspace: bool, body: &str) -> Vec<Sym> {
        let mut syms = Vec::with_capacity(body.len() + 1);
        if metaspace {
            syms.push(self.metaspace_symbol());
        }
        for c in body.chars() {
            if c.is_ascii() {
                syms.push(Sym {
                    id: self.byte_id(c as u8),
                    mergeable: true,
                });
            } else if let Some(id) = self.char_id(c).filter(|_| c != METASPACE) {
                syms.push(Sym {
                    id,
                    mergeable: true,
                });
            } else {
                // Literal metaspace characters always take this path so they
                // cannot be confused with the word-boundary marker.
                let mut tmp = [0u8; 4];
                syms.extend(c.encode_utf8(&mut tmp).bytes().map(|b| Sym {
                    id: self.byte_id(b),
                    mergeable: false,
                }));
            }
        }
        syms
    }

    /// Repeatedly merges every occurrence of the lowest-ranked adjacent pair.
    fn apply_merges(&self, mut syms: Vec<Sym>, out: &mut Vec<u32>) {
        loop {
            let mut best: Option<(u32, u32, u32)> = None; // (rank, left, right)
            for w in syms.windows(2) {
                if !(w[0].mergeable && w[1].mergeable) {
                    continue;
                }
                if let Some((rank, _)) = self.merge_for(w[0].id, w[1].id) {
                    if best.is_none_or(|(r, _, _)| rank < r) {
                        best = Some((rank, w[0].id, w[1].id));
                    }
                }
            }
            let Some((_, left, right)) = best else { break };
            let (_, merged) = self.merge_for(left, right).expect("found above");
            let mut next = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len()
                    && syms[i].mergeable
                    && syms[i + 1].mergeable
                    && syms[i].id == left
                    && syms[i + 1].id == right
                {
                    next.push(Sym {
                        id: merged,
                        mergeable: true,
                    });
                    i += 2;
                } else {
                    next.push(syms[i]);
                    i += 1;
                }
            }
            syms = next;
        }
        out.extend(syms.iter().map(|s| s.id));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tok::model::byte_surface;

    fn model_with(learned: &[&str], merges: &[(&str, &str)]) -> TokenizerModel {
        let specials = vec!["<s>".to_string(), "</s>".to_string()];
        let mut tokens = specials.clone();
        tokens.extend((0..=255u8).map(byte_surface));
        tokens.extend(learned.iter().map(|s| s.to_string()));
        let merges = merges
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        TokenizerModel::new(tokens, merges, specials).unwrap()
    }

    #[test]
    fn empty_text_encodes_to_nothing() {
        let m = model_with(&[], &[]);
        assert!(m.encode("").is_empty());
        assert_eq!(m.decode(&[]).unwrap().text, "");
    }

    #[test]
    fn merge_ab_yields_one_token() {
        let m = model_with(
            &["\u{2581}", "ab", "\u{2581}ab"],
            &[("a", "b"), ("\u{2581}", "ab")],
        );
        // "ab" is seen as "▁ab" because of the leading dummy space.
        assert_eq!(m.encode("ab"), vec![m.id("\u{2581}ab").unwrap()]);
        let only_ab = model_with(&["ab"], &[("a", "b")]);
        // Without a metaspace token the marker falls back to the space byte.
        assert_eq!(
            only_ab.encode("ab"),
            vec![only_ab.byte_id(b' '), only_ab.id("ab").unwrap()]
        );
        assert_eq!(only_ab.decode(&only_ab.encode("ab")).unwrap().text, "ab");
    }

    #[test]
    fn emoji_falls_back_to_utf8_bytes() {
        let m = model_with(&["\u{2581}"], &[]);
        let ids = m.encode("😀");
        let expected: Vec<u32> = std::iter::once(m.id("\u{2581}").unwrap())
            .chain("😀".bytes().map(|b| m.byte_id(b)))
            .collect();
        assert_eq!(ids, expected);
        assert_eq!(m.decode(&ids).unwrap().text, "😀");
    }

    #[test]
    fn arabic_alef_bytes_decode_to_the_letter() {
        let m = model_with(&[], &[]);
        let ids = [m.byte_id(0xD8), m.byte_id(0xA7)];
        let d = m.decode(&ids).unwrap();
        assert_eq!(d.text, "ا");
        assert!(!d.lossy);
    }

    #[test]
    fn invalid_utf8_is_replaced_and_flagged() {
        let m = model_with(&[], &[]);
        let d = m.decode(&[m.byte_id(b'x'), m.byte_id(0xD8)]).unwrap();
        assert!(d.lossy);
        assert_eq!(d.text, "x\u{FFFD}");
    }

    #[test]
    fn out_of_range_id_is_an_error() {
        let m = model_with(&[], &[]);
        let err = m.decode(&[m.vocab_size() as u32]).unwrap_err();
        assert!(matches!(err, Error::IdOutOfRange { .. }));
    }

    #[test]
    fn literal_metaspace_round_trips_through_bytes() {
        let m = model_with(&["\u{2581}"], &[]);
        for s in ["\u{2581}", "a\u{2581}b", " \u{2581} ", "\u{2581}\u{2581}x"] {
            assert_eq!(m.decode(&m.encode(s)).unwrap().text, s, "{s:?}");
        }
    }

    #[test]
    fn specials_encode_atomically() {
        let m = model_with(&[], &[]);
        assert_eq!(m.encode("<s>"), vec![m.id("<s>").unwrap()]);
        assert_eq!(m.encode("</s>"), vec![m.id("</s>").unwrap()]);
        for s in ["<s>hi</s>", "a <s> b", " <s>", "<s> "] {
            assert_eq!(m.decode(&m.encode(s)).unwrap().text, s, "{s:?}");
        }
    }

    #[test]
    fn merges_apply_in_rank_order() {
        // Rank 0 = (b, c), so "abc" must become a + bc, never ab + c.
        let m = model_with(&["bc", "ab", "abc"], &[("b", "c"), ("a", "b"), ("a", "bc")]);
        let ids = m.encode_surface("abc");
        assert_eq!(ids, vec![m.id("abc").unwrap()]);
        let m = model_with(&["bc", "ab"], &[("b", "c"), ("a", "b")]);
        assert_eq!(
            m.encode_surface("abc"),
            vec![m.byte_id(b'a'), m.id("bc").unwrap()]
        );
    }

    #[test]
    fn encode_surface_strips_the_metaspace_prefix() {
        let m = model_with(&["\u{2581}"], &[]);
        assert_eq!(
            m.encode_surface("\u{2581}a"),
            vec![m.id("\u{2581}").unwrap(), m.byte_id(b'a')]
        );
    }
}

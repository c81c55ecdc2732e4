use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::io::atomic_write;

/// Word-boundary marker prefixed to words that follow a space.
pub const METASPACE: char = '\u{2581}';

pub const FORMAT_VERSION: u32 = 1;

/// Surface of the byte token for `b`. ASCII bytes are spelled as the
/// character itself so they double as character tokens; the upper half uses
/// the `<0xNN>` spelling.
pub fn byte_surface(b: u8) -> String {
    if b.is_ascii() {
        (b as char).to_string()
    } else {
        format!("<0x{b:02X}>")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Special,
    Byte(u8),
    Learned,
}

/// Byte-fallback BPE tokenizer: vocabulary, ordered merges and reserved
/// special tokens.
///
/// The model is immutable once built. Construction validates every
/// structural invariant so that encoding can never fail.
#[derive(Debug, Clone)]
pub struct TokenizerModel {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    merges: Vec<(String, String)>,
    specials: Vec<String>,
    kinds: Vec<TokenKind>,
    byte_ids: [u32; 256],
    /// (left id, right id) -> (rank, output id)
    merge_index: HashMap<(u32, u32), (u32, u32)>,
    metaspace_id: Option<u32>,
}

impl PartialEq for TokenizerModel {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
            && self.merges == other.merges
            && self.specials == other.specials
    }
}

impl Eq for TokenizerModel {}

impl TokenizerModel {
    /// Builds a model from surfaces in id order, merges in rank order and the
    /// list of special surfaces (each of which must appear in `tokens`).
    pub fn new(
        tokens: Vec<String>,
        merges: Vec<(String, String)>,
        specials: Vec<String>,
    ) -> Result<Self> {
        let invalid = |msg: String| Error::InvalidModel(msg);

        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(invalid(format!("token {i} has an empty surface")));
            }
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(invalid(format!("duplicate surface {t:?}")));
            }
        }
        if tokens.len() > u32::MAX as usize {
            return Err(invalid("vocabulary exceeds u32 ids".into()));
        }

        let mut kinds = vec![TokenKind::Learned; tokens.len()];
        let mut byte_ids = [0u32; 256];
        for b in 0..=255u8 {
            let s = byte_surface(b);
            let id = *ids
                .get(&s)
                .ok_or_else(|| invalid(format!("byte token {s:?} missing")))?;
            byte_ids[b as usize] = id;
            kinds[id as usize] = TokenKind::Byte(b);
        }

        let mut seen = HashSet::new();
        for s in &specials {
            if !seen.insert(s.as_str()) {
                return Err(invalid(format!("special {s:?} listed twice")));
            }
            let id = *ids
                .get(s)
                .ok_or_else(|| invalid(format!("special {s:?} missing from vocab")))?;
            if let TokenKind::Byte(_) = kinds[id as usize] {
                return Err(invalid(format!("special {s:?} collides with a byte token")));
            }
            kinds[id as usize] = TokenKind::Special;
        }

        for (i, t) in tokens.iter().enumerate() {
            if kinds[i] == TokenKind::Learned && t.chars().skip(1).any(|c| c == METASPACE) {
                return Err(invalid(format!(
                    "learned token {t:?} has a metaspace marker past its first character"
                )));
            }
        }

        let mut merge_index = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            let lookup = |s: &str| {
                ids.get(s)
                    .copied()
                    .ok_or_else(|| invalid(format!("merge {rank} references unknown token {s:?}")))
            };
            let (li, ri) = (lookup(l)?, lookup(r)?);
            for id in [li, ri] {
                match kinds[id as usize] {
                    TokenKind::Special => {
                        return Err(invalid(format!("merge {rank} uses a special token")))
                    }
                    TokenKind::Byte(b) if !b.is_ascii() => {
                        return Err(invalid(format!("merge {rank} uses a non-ASCII byte token")))
                    }
                    _ => {}
                }
            }
            let out = lookup(&format!("{l}{r}"))?;
            if kinds[out as usize] != TokenKind::Learned {
                return Err(invalid(format!(
                    "merge {rank} output {:?} is not a learned token",
                    tokens[out as usize]
                )));
            }
            if merge_index.insert((li, ri), (rank as u32, out)).is_some() {
                return Err(invalid(format!(
                    "merge {rank} ({l:?}, {r:?}) is duplicated"
                )));
            }
        }

        let metaspace_id = ids
            .get(&METASPACE.to_string())
            .copied()
            .filter(|&id| kinds[id as usize] == TokenKind::Learned);

        Ok(Self {
            tokens,
            ids,
            merges,
            specials,
            kinds,
            byte_ids,
            merge_index,
            metaspace_id,
        })
    }

    /// A model holding only the given specials followed by the 256 byte tokens.
    pub fn bytes_only(specials: &[String]) -> Result<Self> {
        let mut tokens: Vec<String> = specials.to_vec();
        tokens.extend((0..=255u8).map(byte_surface));
        Self::new(tokens, Vec::new(), specials.to_vec())
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, surface: &str) -> Option<u32> {
        self.ids.get(surface).copied()
    }

    pub fn kind(&self, id: u32) -> Option<TokenKind> {
        self.kinds.get(id as usize).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn specials(&self) -> &[String] {
        &self.specials
    }

    pub fn is_special(&self, surface: &str) -> bool {
        self.id(surface)
            .is_some_and(|id| self.kinds[id as usize] == TokenKind::Special)
    }

    pub fn byte_id(&self, b: u8) -> u32 {
        self.byte_ids[b as usize]
    }

    pub(crate) fn metaspace_id(&self) -> Option<u32> {
        self.metaspace_id
    }

    pub(crate) fn merge_for(&self, left: u32, right: u32) -> Option<(u32, u32)> {
        self.merge_index.get(&(left, right)).copied()
    }

    /// Id of a learned single-character token, if `c` has one.
    pub(crate) fn char_id(&self, c: char) -> Option<u32> {
        let mut buf = [0u8; 4];
        let id = *self.ids.get(&*c.encode_utf8(&mut buf))?;
        (self.kinds[id as usize] == TokenKind::Learned).then_some(id)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFileRef {
            version: FORMAT_VERSION,
            specials: &self.specials,
            vocab: VocabRef(&self.tokens),
            merges: &self.merges,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(json).map_err(|e| Error::InvalidModel(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(Error::InvalidModel(format!(
                "unsupported version {}",
                file.version
            )));
        }
        let mut entries = file.vocab.0;
        entries.sort_by_key(|(_, id)| *id);
        for (expected, (surface, id)) in entries.iter().enumerate() {
            if *id as usize != expected {
                return Err(Error::InvalidModel(format!(
                    "ids are not dense: {surface:?} has id {id}, expected {expected}"
                )));
            }
        }
        let tokens = entries.into_iter().map(|(s, _)| s).collect();
        Self::new(tokens, file.merges, file.specials)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    version: u32,
    specials: &'a [String],
    vocab: VocabRef<'a>,
    merges: &'a [(String, String)],
}

struct VocabRef<'a>(&'a [String]);

impl Serialize for VocabRef<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (id, surface) in self.0.iter().enumerate() {
            map.serialize_entry(surface, &id)?;
        }
        map.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    specials: Vec<String>,
    vocab: VocabEntries,
    merges: Vec<(String, String)>,
}

/// Vocabulary entries in file order; duplicates are kept so validation can
/// reject them instead of silently keeping the last one.
struct VocabEntries(Vec<(String, u32)>);

impl<'de> Deserialize<'de> for VocabEntries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = VocabEntries;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from token surface to id")
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::with_capacity(access.size_hint().unwrap_or(0));
                while let Some((k, v)) = access.next_entry::<String, u32>()? {
                    out.push((k, v));
                }
                Ok(VocabEntries(out))
            }
        }

        deserializer.deserialize_map(EntriesVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specials() -> Vec<String> {
        vec!["<s>".into(), "</s>".into()]
    }

    #[test]
    fn bytes_only_model_layout() {
        let m = TokenizerModel::bytes_only(&specials()).unwrap();
        assert_eq!(m.vocab_size(), 258);
        assert_eq!(m.id("<s>"), Some(0));
        assert_eq!(m.byte_id(0), 2);
        assert_eq!(m.token(2 + 0x61), Some("a"));
        assert_eq!(m.token(2 + 0xD8), Some("<0xD8>"));
        assert_eq!(m.kind(1), Some(TokenKind::Special));
        assert_eq!(m.kind(2 + 0xD8), Some(TokenKind::Byte(0xD8)));
    }

    #[test]
    fn json_round_trip_is_byte_exact() {
        let mut tokens: Vec<String> = specials();
        tokens.extend((0..=255u8).map(byte_surface));
        tokens.push("ab".into());
        tokens.push("\u{2581}".into());
        let m = TokenizerModel::new(tokens, vec![("a".into(), "b".into())], specials()).unwrap();
        let json = m.to_json();
        let back = TokenizerModel::from_json(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn rejects_merge_with_missing_output() {
        let mut tokens: Vec<String> = specials();
        tokens.extend((0..=255u8).map(byte_surface));
        let err =
            TokenizerModel::new(tokens, vec![("a".into(), "b".into())], specials()).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn rejects_duplicate_and_sparse_ids() {
        let m = TokenizerModel::bytes_only(&specials()).unwrap();
        let json = m.to_json().replace("\"</s>\": 1", "\"</s>\": 7");
        assert!(TokenizerModel::from_json(&json).is_err());
        let json = m.to_json().replace("\"</s>\": 1", "\"<s>\": 1");
        assert!(TokenizerModel::from_json(&json).is_err());
    }

    #[test]
    fn rejects_special_that_is_a_byte() {
        let err = TokenizerModel::bytes_only(&["|".to_string()]).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn rejects_missing_byte_token() {
        let tokens: Vec<String> = (0..=254u8).map(byte_surface).collect();
        assert!(TokenizerModel::new(tokens, vec![], vec![]).is_err());
    }
}

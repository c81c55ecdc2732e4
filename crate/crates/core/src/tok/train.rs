//! Greedy BPE training with byte fallback.
//!
//! The base alphabet is characters. ASCII characters are covered by their
//! byte tokens; every other character competes for a vocabulary slot on the
//! same footing as pair merges. Each step takes the most frequent candidate
//! (a character to promote or an adjacent token pair to merge), breaking
//! ties by the smaller surface string. Characters that never win a slot stay
//! as byte-fallback symbols and never take part in merges.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{byte_surface, TokenKind, TokenizerModel, METASPACE};
use super::pretok::{pre_tokenize, Piece};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub vocab_size: usize,
    pub specials: Vec<String>,
    /// Train on a uniform random subset of this many documents.
    pub sample_docs: Option<usize>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(vocab_size: usize, specials: Vec<String>) -> Self {
        Self {
            vocab_size,
            specials,
            sample_docs: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sym {
    Tok(u32),
    /// Non-ASCII character that may still be promoted to a token.
    Cand(char),
    /// Literal metaspace character; always byte fallback.
    Fixed,
}

struct Word {
    syms: Vec<Sym>,
    freq: u64,
}

#[derive(PartialEq, Eq)]
enum Kind {
    Pair(u32, u32),
    Char(char),
}

#[derive(PartialEq, Eq)]
struct Candidate {
    count: u64,
    surface: String,
    left_len: usize,
    kind: Kind,
}

impl Candidate {
    fn key(&self) -> (u64, Reverse<&str>, Reverse<usize>) {
        (
            self.count,
            Reverse(self.surface.as_str()),
            Reverse(self.left_len),
        )
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Trainer {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    kinds: Vec<TokenKind>,
    merges: Vec<(String, String)>,
    words: Vec<Word>,
    pair_counts: HashMap<(u32, u32), u64>,
    pair_words: HashMap<(u32, u32), Vec<usize>>,
    char_counts: HashMap<char, u64>,
    char_words: HashMap<char, Vec<usize>>,
    heap: BinaryHeap<Candidate>,
}

/// Trains a tokenizer on `corpus`. Ids are laid out as specials, then the
/// 256 byte tokens, then learned tokens in the order they were learned.
pub fn train_bpe<S: AsRef<str>>(corpus: &[S], config: &TrainConfig) -> Result<TokenizerModel> {
    let specials = &config.specials;
    let minimum = 256 + specials.len();
    if config.vocab_size < minimum {
        return Err(Error::VocabTooSmall {
            requested: config.vocab_size,
            minimum,
            specials: specials.len(),
        });
    }
    let byte_surfaces: HashSet<String> = (0..=255u8).map(byte_surface).collect();
    let mut seen = HashSet::new();
    for s in specials {
        if s.is_empty() || byte_surfaces.contains(s) || !seen.insert(s) {
            return Err(Error::InvalidParameter(format!(
                "special token {s:?} is empty, duplicated or collides with a byte token"
            )));
        }
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let docs: Vec<&str> = match config.sample_docs {
        Some(n) if n < corpus.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut picked = index::sample(&mut rng, corpus.len(), n).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| corpus[i].as_ref()).collect()
        }
        _ => corpus.iter().map(AsRef::as_ref).collect(),
    };

    let mut trainer = Trainer::new(specials);
    trainer.load_words(&docs, specials);
    if trainer.words.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    trainer.seed_heap();
    trainer.run(config.vocab_size);
    TokenizerModel::new(trainer.tokens, trainer.merges, specials.clone())
}

impl Trainer {
    fn new(specials: &[String]) -> Self {
        let mut tokens: Vec<String> = specials.to_vec();
        let mut kinds = vec![TokenKind::Special; specials.len()];
        for b in 0..=255u8 {
            tokens.push(byte_surface(b));
            kinds.push(TokenKind::Byte(b));
        }
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            tokens,
            ids,
            kinds,
            merges: Vec::new(),
            words: Vec::new(),
            pair_counts: HashMap::new(),
            pair_words: HashMap::new(),
            char_counts: HashMap::new(),
            char_words: HashMap::new(),
            heap: BinaryHeap::new(),
        }
    }

    fn load_words(&mut self, docs: &[&str], specials: &[String]) {
        let mut freqs: HashMap<(bool, &str), u64> = HashMap::new();
        for doc in docs {
            for piece in pre_tokenize(doc, specials) {
                if let Piece::Word { metaspace, body } = piece {
                    *freqs.entry((metaspace, body)).or_default() += 1;
                }
            }
        }
        let mut distinct: Vec<_> = freqs.into_iter().collect();
        distinct.sort_unstable();
        let specials_base = specials.len() as u32;
        for ((metaspace, body), freq) in distinct {
            let mut syms = Vec::with_capacity(body.len() + 1);
            if metaspace {
                syms.push(Sym::Cand(METASPACE));
            }
            for c in body.chars() {
                syms.push(if c.is_ascii() {
                    Sym::Tok(specials_base + c as u32)
                } else if c == METASPACE {
                    Sym::Fixed
                } else {
                    Sym::Cand(c)
                });
            }
            let w = self.words.len();
            for s in &syms {
                if let Sym::Cand(c) = *s {
                    *self.char_counts.entry(c).or_default() += freq;
                    self.char_words.entry(c).or_default().push(w);
                }
            }
            for p in pairs(&syms) {
                *self.pair_counts.entry(p).or_default() += freq;
                self.pair_words.entry(p).or_default().push(w);
            }
            self.words.push(Word { syms, freq });
        }
    }

    fn seed_heap(&mut self) {
        let pairs: Vec<_> = self.pair_counts.iter().map(|(&p, &c)| (p, c)).collect();
        for (p, count) in pairs {
            self.push_pair(p, count);
        }
        let chars: Vec<_> = self.char_counts.iter().map(|(&c, &n)| (c, n)).collect();
        for (c, count) in chars {
            let surface = c.to_string();
            if !self.ids.contains_key(&surface) {
                self.heap.push(Candidate {
                    count,
                    surface,
                    left_len: 0,
                    kind: Kind::Char(c),
                });
            }
        }
    }

    fn push_pair(&mut self, (l, r): (u32, u32), count: u64) {
        if count == 0 {
            return;
        }
        let left = &self.tokens[l as usize];
        let surface = format!("{left}{}", self.tokens[r as usize]);
        // Merging into a special or byte surface would alias a reserved token.
        if let Some(&id) = self.ids.get(&surface) {
            if self.kinds[id as usize] != TokenKind::Learned {
                return;
            }
        }
        self.heap.push(Candidate {
            count,
            left_len: left.len(),
            surface,
            kind: Kind::Pair(l, r),
        });
    }

    fn run(&mut self, vocab_size: usize) {
        while self.tokens.len() < vocab_size {
            let Some(cand) = self.heap.pop() else { break };
            match cand.kind {
                Kind::Char(c) => {
                    if self.char_counts.get(&c) != Some(&cand.count) {
                        continue;
                    }
                    self.char_counts.remove(&c);
                    let id = self.add_token(cand.surface);
                    let affected = self.char_words.remove(&c).unwrap_or_default();
                    self.rewrite(affected, |syms| {
                        for s in syms.iter_mut() {
                            if *s == Sym::Cand(c) {
                                *s = Sym::Tok(id);
                            }
                        }
                    });
                }
                Kind::Pair(l, r) => {
                    if self.pair_counts.get(&(l, r)) != Some(&cand.count) {
                        continue;
                    }
                    let out = match self.ids.get(&cand.surface) {
                        Some(&id) => id,
                        None => self.add_token(cand.surface),
                    };
                    self.merges.push((
                        self.tokens[l as usize].clone(),
                        self.tokens[r as usize].clone(),
                    ));
                    let affected = self.pair_words.remove(&(l, r)).unwrap_or_default();
                    self.rewrite(affected, |syms| merge_pair(syms, l, r, out));
                }
            }
        }
    }

    fn add_token(&mut self, surface: String) -> u32 {
        let id = self.tokens.len() as u32;
        self.ids.insert(surface.clone(), id);
        self.tokens.push(surface);
        self.kinds.push(TokenKind::Learned);
        id
    }

    /// Applies `edit` to each affected word and updates pair statistics.
    fn rewrite(&mut self, mut affected: Vec<usize>, edit: impl Fn(&mut Vec<Sym>)) {
        affected.sort_unstable();
        affected.dedup();
        let mut delta: HashMap<(u32, u32), i64> = HashMap::new();
        for w in affected {
            let word = &mut self.words[w];
            let freq = word.freq as i64;
            let before = word.syms.clone();
            edit(&mut word.syms);
            if word.syms == before {
                continue;
            }
            for p in pairs(&before) {
                *delta.entry(p).or_default() -= freq;
            }
            for p in pairs(&word.syms) {
                *delta.entry(p).or_default() += freq;
                self.pair_words.entry(p).or_default().push(w);
            }
        }
        let mut changed: Vec<_> = delta.into_iter().filter(|&(_, d)| d != 0).collect();
        changed.sort_unstable();
        for (p, d) in changed {
            let count = self.pair_counts.entry(p).or_default();
            *count = (*count as i64 + d) as u64;
            let count = *count;
            if count == 0 {
                self.pair_counts.remove(&p);
                self.pair_words.remove(&p);
            } else {
                self.push_pair(p, count);
            }
        }
    }
}

fn pairs(syms: &[Sym]) -> impl Iterator<Item = (u32, u32)> + '_ {
    syms.windows(2).filter_map(|w| match (w[0], w[1]) {
        (Sym::Tok(a), Sym::Tok(b)) => Some((a, b)),
        _ => None,
    })
}

fn merge_pair(syms: &mut Vec<Sym>, l: u32, r: u32, out: u32) {
    let mut i = 0;
    let mut j = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == Sym::Tok(l) && syms[i + 1] == Sym::Tok(r) {
            syms[j] = Sym::Tok(out);
            i += 2;
        } else {
            syms[j] = syms[i];
            i += 1;
        }
        j += 1;
    }
    syms.truncate(j);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specials2() -> Vec<String> {
        vec!["<s>".into(), "</s>".into()]
    }

    #[test]
    fn first_merge_on_repeated_word() {
        // One free slot: "aa" (count 3) ties with promoting "▁" (count 3) and
        // wins on surface order.
        let m = train_bpe(&["aa aa aa"], &TrainConfig::new(259, specials2())).unwrap();
        assert_eq!(m.merges()[0], ("a".to_string(), "a".to_string()));
        assert_eq!(m.vocab_size(), 259);
    }

    #[test]
    fn single_letter_corpus_learns_no_merges() {
        let m = train_bpe(&["b"], &TrainConfig::new(259, specials2())).unwrap();
        assert!(m.merges().is_empty());
        assert_eq!(m.vocab_size(), 259);
        assert_eq!(m.token(258), Some("\u{2581}"));
        // With room to spare the whole word becomes a token.
        let m = train_bpe(&["b"], &TrainConfig::new(300, specials2())).unwrap();
        assert_eq!(m.merges(), &[("\u{2581}".to_string(), "b".to_string())]);
        assert_eq!(m.vocab_size(), 260);
    }

    #[test]
    fn ab_corpus_merges_a_b_first() {
        let m = train_bpe(&["ab ab", "ab"], &TrainConfig::new(300, vec![])).unwrap();
        assert_eq!(m.merges()[0], ("a".to_string(), "b".to_string()));
        assert_eq!(m.merges()[1], ("\u{2581}".to_string(), "ab".to_string()));
    }

    #[test]
    fn rejects_small_vocab_and_empty_corpus() {
        let err = train_bpe(&["x"], &TrainConfig::new(257, specials2())).unwrap_err();
        assert!(matches!(err, Error::VocabTooSmall { minimum: 258, .. }));
        let empty: [&str; 0] = [];
        assert!(matches!(
            train_bpe(&empty, &TrainConfig::new(300, vec![])).unwrap_err(),
            Error::EmptyCorpus
        ));
        assert!(matches!(
            train_bpe(&["  \n "], &TrainConfig::new(300, vec![])).unwrap_err(),
            Error::EmptyCorpus
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = [
            "the cat sat on the mat",
            "قال الولد في البيت",
            "the the ال ال",
        ];
        let cfg = TrainConfig::new(320, specials2());
        let a = train_bpe(&corpus, &cfg).unwrap();
        let b = train_bpe(&corpus, &cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn never_merges_into_a_reserved_surface() {
        // "<0x80>" spelled out in text must not alias the byte token.
        let corpus = ["<0x80> <0x80> <0x80>"];
        let m = train_bpe(&corpus, &TrainConfig::new(400, vec![])).unwrap();
        let id = m.id("<0x80>").unwrap();
        assert_eq!(m.kind(id), Some(TokenKind::Byte(0x80)));
        let ids = m.encode(corpus[0]);
        assert_eq!(m.decode(&ids).unwrap().text, corpus[0]);
    }

    #[test]
    fn sampling_is_seeded() {
        let corpus: Vec<String> = (0..50).map(|i| format!("w{i} common")).collect();
        let mut cfg = TrainConfig::new(300, vec![]);
        cfg.sample_docs = Some(10);
        cfg.seed = 3;
        let a = train_bpe(&corpus, &cfg).unwrap();
        let b = train_bpe(&corpus, &cfg).unwrap();
        assert_eq!(a, b);
    }
}

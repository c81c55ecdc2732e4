//! Reference BPE trainer: recounts every pair and character from scratch on
//! each step and works on token surfaces rather than ids. Slow, and kept
//! deliberately free of the library's data structures.

use std::collections::{BTreeMap, HashSet};

const METASPACE: char = '\u{2581}';

#[derive(Clone, PartialEq)]
enum Sym {
    Tok(String),
    Cand(char),
    Fixed,
}

fn byte_surface(b: u8) -> String {
    if b.is_ascii() {
        (b as char).to_string()
    } else {
        format!("<0x{b:02X}>")
    }
}

/// Splits one special-free text into (metaspace, body) words, mirroring the
/// documented rules: a dummy leading space, a space before a non-whitespace
/// run becomes its prefix, all other whitespace stands alone.
fn words(text: &str) -> Vec<(bool, String)> {
    let mut out = Vec::new();
    if text.is_empty() {
        return out;
    }
    let chars: Vec<char> = format!(" {text}").chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            if chars[i] == ' ' && i + 1 < chars.len() && !chars[i + 1].is_whitespace() {
                let start = i + 1;
                let mut end = start;
                while end < chars.len() && !chars[end].is_whitespace() {
                    end += 1;
                }
                out.push((true, chars[start..end].iter().collect()));
                i = end;
            } else {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        out.push((false, chars[start..i].iter().collect()));
    }
    out
}

pub struct OracleResult {
    pub tokens: Vec<String>,
    pub merges: Vec<(String, String)>,
}

// count, merged surface, left length, and the pair itself
type Best = (u64, String, usize, Option<(String, String)>);

/// `corpus` must not contain any of `specials`.
pub fn train(corpus: &[&str], vocab_size: usize, specials: &[&str]) -> OracleResult {
    let mut tokens: Vec<String> = specials.iter().map(|s| s.to_string()).collect();
    tokens.extend((0..=255u8).map(byte_surface));
    let reserved: HashSet<String> = tokens.iter().cloned().collect();
    let mut vocab: HashSet<String> = reserved.clone();
    let mut merges = Vec::new();

    let mut seqs: Vec<Vec<Sym>> = Vec::new();
    for doc in corpus {
        for (ms, body) in words(doc) {
            let mut seq = Vec::new();
            if ms {
                seq.push(Sym::Cand(METASPACE));
            }
            for c in body.chars() {
                seq.push(if c.is_ascii() {
                    Sym::Tok(c.to_string())
                } else if c == METASPACE {
                    Sym::Fixed
                } else {
                    Sym::Cand(c)
                });
            }
            seqs.push(seq);
        }
    }

    while tokens.len() < vocab_size {
        // (count, surface, left_len) -> action; best = max count, then
        // smallest surface, then shortest left part.
        let mut pair_counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        let mut char_counts: BTreeMap<char, u64> = BTreeMap::new();
        for seq in &seqs {
            for w in seq.windows(2) {
                if let (Sym::Tok(a), Sym::Tok(b)) = (&w[0], &w[1]) {
                    *pair_counts.entry((a.clone(), b.clone())).or_default() += 1;
                }
            }
            for s in seq {
                if let Sym::Cand(c) = s {
                    *char_counts.entry(*c).or_default() += 1;
                }
            }
        }
        let mut best: Option<Best> = None;
        let better = |cand: &(u64, String, usize), best: &Option<Best>| match best {
            None => true,
            Some((c, s, l, _)) => {
                cand.0 > *c || (cand.0 == *c && (cand.1 < *s || (cand.1 == *s && cand.2 < *l)))
            }
        };
        for ((a, b), n) in &pair_counts {
            let surface = format!("{a}{b}");
            if reserved.contains(&surface) {
                continue;
            }
            let key = (*n, surface, a.len());
            if better(&key, &best) {
                best = Some((key.0, key.1, key.2, Some((a.clone(), b.clone()))));
            }
        }
        for (c, n) in &char_counts {
            let surface = c.to_string();
            if vocab.contains(&surface) {
                continue;
            }
            let key = (*n, surface, 0);
            if better(&key, &best) {
                best = Some((key.0, key.1, key.2, None));
            }
        }
        let Some((_, surface, _, pair)) = best else {
            break;
        };
        match pair {
            None => {
                let c = surface.chars().next().unwrap();
                for seq in &mut seqs {
                    for s in seq.iter_mut() {
                        if *s == Sym::Cand(c) {
                            *s = Sym::Tok(surface.clone());
                        }
                    }
                }
            }
            Some((a, b)) => {
                for seq in &mut seqs {
                    let mut out = Vec::with_capacity(seq.len());
                    let mut i = 0;
                    while i < seq.len() {
                        if i + 1 < seq.len()
                            && seq[i] == Sym::Tok(a.clone())
                            && seq[i + 1] == Sym::Tok(b.clone())
                        {
                            out.push(Sym::Tok(surface.clone()));
                            i += 2;
                        } else {
                            out.push(seq[i].clone());
                            i += 1;
                        }
                    }
                    *seq = out;
                }
                merges.push((a, b));
            }
        }
        if vocab.insert(surface.clone()) {
            tokens.push(surface);
        }
    }
    OracleResult { tokens, merges }
}

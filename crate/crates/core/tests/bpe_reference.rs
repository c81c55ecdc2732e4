mod common {
    pub mod bpe_oracle;
}

use common::bpe_oracle;
use langexp_core::tok::{train_bpe, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALPHABET: &[&str] = &[
    "a", "b", "c", "ab", "ba", " ", " ", " ", "  ", "\n", "\t", "ال", "م", "ن", "كتب", "😀",
    "\u{2581}", "é", "<", "0x", "80>",
];

fn random_corpus(rng: &mut ChaCha8Rng) -> Vec<String> {
    let docs = rng.gen_range(1..6);
    (0..docs)
        .map(|_| {
            let mut s = String::new();
            let target = rng.gen_range(0..200);
            while s.len() < target {
                s.push_str(ALPHABET[rng.gen_range(0..ALPHABET.len())]);
            }
            s
        })
        .collect()
}

#[test]
fn matches_exhaustive_reference_on_random_corpora() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..40 {
        let corpus = random_corpus(&mut rng);
        let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
        if refs.iter().all(|d| d.trim().is_empty()) {
            continue;
        }
        let vocab = 258 + rng.gen_range(0..120);
        let specials = ["<s>", "</s>"];
        let cfg = TrainConfig::new(vocab, specials.iter().map(|s| s.to_string()).collect());
        let model = train_bpe(&refs, &cfg).unwrap();
        let oracle = bpe_oracle::train(&refs, vocab, &specials);
        assert_eq!(
            model.merges(),
            oracle.merges.as_slice(),
            "case {case}: {corpus:?}"
        );
        assert_eq!(model.tokens(), oracle.tokens.as_slice(), "case {case}");
    }
}

#[test]
fn reference_agrees_on_documented_examples() {
    let o = bpe_oracle::train(&["aa aa aa"], 259, &["<s>", "</s>"]);
    assert_eq!(o.merges[0], ("a".to_string(), "a".to_string()));
    let o = bpe_oracle::train(&["ab ab", "ab"], 300, &[]);
    assert_eq!(
        o.merges[..2],
        [("a".into(), "b".into()), ("\u{2581}".into(), "ab".into())]
    );
}

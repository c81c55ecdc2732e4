//! Pre-tokenization shared by training and encoding.
//!
//! Special-token surfaces are cut out first. A single space is prepended to
//! the text unless it starts with a special token. Within each remaining
//! segment, a space directly followed by a non-whitespace run becomes that
//! run's metaspace prefix; every other whitespace character stands alone.
//! The scheme is lossless, which is what makes decoding an exact inverse.

/// One pre-token borrowed from the input text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece<'a> {
    /// Index into the special list passed to [`pre_tokenize`].
    Special(usize),
    /// A whitespace-free run, optionally preceded by a space folded into a
    /// metaspace marker.
    Word { metaspace: bool, body: &'a str },
    /// A space that does not precede a word.
    Space,
    /// Any other whitespace character.
    Whitespace(char),
}

/// Splits `text` into pre-tokens. `specials` are matched leftmost-longest.
pub fn pre_tokenize<'a, S: AsRef<str>>(text: &'a str, specials: &[S]) -> Vec<Piece<'a>> {
    let mut pieces = Vec::new();
    if text.is_empty() {
        return pieces;
    }
    let mut first = true;
    let mut seg_start = 0;
    let mut pos = 0;
    while pos < text.len() {
        if let Some((idx, len)) = match_special(&text[pos..], specials) {
            if pos > seg_start {
                segment(&text[seg_start..pos], first, &mut pieces);
            }
            first = false;
            pieces.push(Piece::Special(idx));
            pos += len;
            seg_start = pos;
        } else {
            pos += text[pos..].chars().next().map_or(1, char::len_utf8);
        }
    }
    if seg_start < text.len() {
        segment(&text[seg_start..], first, &mut pieces);
    }
    pieces
}

fn match_special<S: AsRef<str>>(rest: &str, specials: &[S]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (i, s) in specials.iter().enumerate() {
        let s = s.as_ref();
        if !s.is_empty() && rest.starts_with(s) && best.is_none_or(|(_, l)| s.len() > l) {
            best = Some((i, s.len()));
        }
    }
    best
}

fn segment<'a>(seg: &'a str, leading_dummy: bool, out: &mut Vec<Piece<'a>>) {
    let mut pending_space = leading_dummy;
    let mut iter = seg.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if c.is_whitespace() {
            if pending_space {
                out.push(Piece::Space);
            }
            if c == ' ' {
                pending_space = true;
            } else {
                pending_space = false;
                out.push(Piece::Whitespace(c));
            }
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, d)) = iter.peek() {
            if d.is_whitespace() {
                break;
            }
            end = j + d.len_utf8();
            iter.next();
        }
        out.push(Piece::Word {
            metaspace: pending_space,
            body: &seg[i..end],
        });
        pending_space = false;
    }
    if pending_space {
        out.push(Piece::Space);
    }
}

//! Character-level helpers shared by chunking, tokenization and the mock
//! backends. All lengths in this crate are counted in Unicode scalar values.

use std::collections::BTreeSet;

/// Sentence-terminal punctuation used for passage and sentence cuts.
pub const SENTENCE_TERMINALS: [char; 3] = ['。', '！', '？'];

/// Secondary cut point when a window holds no sentence terminal.
pub const CLAUSE_TERMINAL: char = '；';

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

pub fn is_sentence_terminal(c: char) -> bool {
    SENTENCE_TERMINALS.contains(&c)
}

/// CJK unified ideographs, extension A and B, and compatibility ideographs.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0x20000..=0x2A6DF
        | 0xF900..=0xFAFF)
}

pub fn cjk_count(s: &str) -> usize {
    s.chars().filter(|c| is_cjk(*c)).count()
}

/// CRLF to LF, lone CR to LF, then trim surrounding whitespace.
pub fn normalize_text(s: &str) -> String {
    s.replace("\r\n", "\n").replace('\r', "\n").trim().to_string()
}

/// Set of character bigrams (adjacent scalar-value pairs).
pub fn char_bigrams(s: &str) -> BTreeSet<(char, char)> {
    let chars: Vec<char> = s.chars().collect();
    chars.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Character bigrams in order, with repetition.
pub fn char_bigram_seq(s: &str) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    chars
        .windows(2)
        .map(|w| [w[0], w[1]].iter().collect())
        .collect()
}

/// Stable 64-bit FNV-1a. Used wherever a hash must not change across
/// platforms or releases (mock backends, seeds).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

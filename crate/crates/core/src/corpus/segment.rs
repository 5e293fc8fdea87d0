use super::{passage_id, sentence_id, Document, PassageChunk, SentenceChunk};
use crate::text::{is_sentence_terminal, CLAUSE_TERMINAL};

pub const DEFAULT_PASSAGE_MAX_LEN: usize = 500;
pub const DEFAULT_SENTENCE_MAX_LEN: usize = 100;

/// Closing marks that stay attached to the sentence they end.
fn is_closer(c: char) -> bool {
    matches!(c, '”' | '’' | '」' | '』' | '）' | ')' | '"' | '\'')
}

/// Greedy passage cuts: fill up to `max_len` characters and cut after the
/// last sentence terminal in the window, else after the last `；`, else hard.
pub fn segment_passages(doc: &Document, max_len: usize) -> Vec<PassageChunk> {
    let max_len = max_len.max(1);
    let chars: Vec<char> = doc.text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let end = if chars.len() - start <= max_len {
            chars.len()
        } else {
            let window = &chars[start..start + max_len];
            let cut = window
                .iter()
                .rposition(|c| is_sentence_terminal(*c))
                .or_else(|| window.iter().rposition(|c| *c == CLAUSE_TERMINAL))
                .map_or(max_len, |i| i + 1);
            start + cut
        };
        let text: String = chars[start..end].iter().collect();
        let ordinal = out.len();
        out.push(PassageChunk {
            passage_id: passage_id(&doc.doc_id, ordinal),
            doc_id: doc.doc_id.clone(),
            doc_ordinal: doc.ordinal,
            ordinal,
            char_len: end - start,
            text,
            sentences: Vec::new(),
        });
        start = end;
    }
    out
}

/// Sentence fragments: each ends after a run of terminals (plus closing
/// quotes/brackets); a trailing unterminated fragment is kept as is.
fn sentence_fragments(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if is_sentence_terminal(chars[i]) {
            let mut end = i + 1;
            while end < chars.len() && (is_sentence_terminal(chars[end]) || is_closer(chars[end])) {
                end += 1;
            }
            out.push(chars[start..end].iter().collect());
            start = end;
            i = end;
        } else {
            i += 1;
        }
    }
    if start < chars.len() {
        out.push(chars[start..].iter().collect());
    }
    out
}

/// Splits a passage at sentence terminals, then merges adjacent fragments
/// greedily while the merged length stays within `max_len`. A lone fragment
/// longer than `max_len` is kept whole and flagged unsplittable.
pub fn segment_sentences(passage: &PassageChunk, max_len: usize) -> Vec<SentenceChunk> {
    let mut merged: Vec<(String, usize)> = Vec::new();
    for frag in sentence_fragments(&passage.text) {
        let flen = frag.chars().count();
        match merged.last_mut() {
            Some((buf, blen)) if *blen + flen <= max_len => {
                buf.push_str(&frag);
                *blen += flen;
            }
            _ => merged.push((frag, flen)),
        }
    }
    merged
        .into_iter()
        .enumerate()
        .map(|(ordinal, (text, char_len))| SentenceChunk {
            sentence_id: sentence_id(&passage.passage_id, ordinal),
            ordinal,
            unsplittable: char_len > max_len,
            text,
            char_len,
        })
        .collect()
}

/// Passages of `doc` with their sentence chunks filled in.
pub fn chunk_document(doc: &Document, passage_max: usize, sentence_max: usize) -> Vec<PassageChunk> {
    let mut passages = segment_passages(doc, passage_max);
    for p in &mut passages {
        p.sentences = segment_sentences(p, sentence_max);
    }
    passages
}

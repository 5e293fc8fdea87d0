//! Deterministic in-process backends. Every mock is a pure function of its
//! input and seed, so pipeline runs over mocks are byte-reproducible.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::json;

use super::types::*;
use super::{ChatBackend, Embedder, IndustryClassifier, QualityScorer, Reranker};
use crate::text::{char_bigram_seq, char_bigrams, char_len, fnv1a64};

/// Sørensen–Dice coefficient over the two strings' character-bigram sets.
/// Two strings without bigrams score 1 when equal and 0 otherwise.
pub fn bigram_dice(a: &str, b: &str) -> f64 {
    let (sa, sb) = (char_bigrams(a), char_bigrams(b));
    if sa.is_empty() && sb.is_empty() {
        return if a == b { 1.0 } else { 0.0 };
    }
    let shared = sa.intersection(&sb).count();
    2.0 * shared as f64 / (sa.len() + sb.len()) as f64
}

/// Reranker scoring `m(dice(a, b))` with `m` the identity map.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiceReranker;

impl Reranker for DiceReranker {
    fn rerank(&self, a: &str, b: &str) -> Result<RerankScore, BackendError> {
        Ok(RerankScore::clamped(bigram_dice(a, b)))
    }
}

/// Wraps a reranker and records every call.
#[derive(Debug, Default)]
pub struct CountingReranker<R> {
    inner: R,
    calls: AtomicUsize,
    pairs: Mutex<Vec<(String, String)>>,
}

impl<R: Reranker> CountingReranker<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
            pairs: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        self.pairs.lock().unwrap().clone()
    }
}

impl<R: Reranker> Reranker for CountingReranker<R> {
    fn rerank(&self, a: &str, b: &str) -> Result<RerankScore, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.pairs
            .lock()
            .unwrap()
            .push((a.to_string(), b.to_string()));
        self.inner.rerank(a, b)
    }
}

/// Hashed character-bigram bag, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedBigramEmbedder {
    dim: usize,
    seed: u64,
}

impl HashedBigramEmbedder {
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim: dim.max(1),
            seed,
        }
    }

    fn bucket(&self, gram: &str) -> usize {
        let mut bytes = self.seed.to_le_bytes().to_vec();
        bytes.extend_from_slice(gram.as_bytes());
        (fnv1a64(&bytes) % self.dim as u64) as usize
    }
}

impl Default for HashedBigramEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM, 0)
    }
}

impl Embedder for HashedBigramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbedVector, BackendError> {
        let mut raw = vec![0.0; self.dim];
        for gram in char_bigram_seq(text) {
            raw[self.bucket(&gram)] += 1.0;
        }
        let v = EmbedVector::normalized(raw);
        if v.degenerate {
            log::debug!("empty embedding input {text:?}, using basis vector");
        }
        Ok(v)
    }
}

/// Keyword table lookup; the longest matching keyword wins, ties go to the
/// earlier table entry. No match yields `none`.
#[derive(Debug, Clone)]
pub struct KeywordClassifier {
    table: Vec<(String, IndustryLabel)>,
}

impl KeywordClassifier {
    pub fn new(table: Vec<(String, IndustryLabel)>) -> Self {
        Self { table }
    }
}

impl Default for KeywordClassifier {
    fn default() -> Self {
        let table = DEFAULT_TAXONOMY
            .iter()
            .flat_map(|(label, kws)| {
                kws.iter()
                    .map(move |kw| (kw.to_string(), IndustryLabel::new(*label)))
            })
            .collect();
        Self { table }
    }
}

impl IndustryClassifier for KeywordClassifier {
    fn classify(&self, text: &str) -> Result<IndustryLabel, BackendError> {
        let mut best: Option<&(String, IndustryLabel)> = None;
        for entry in &self.table {
            if text.contains(entry.0.as_str())
                && best.is_none_or(|b| char_len(&entry.0) > char_len(&b.0))
            {
                best = Some(entry);
            }
        }
        Ok(best.map_or_else(IndustryLabel::none, |(_, l)| l.clone()))
    }
}

/// Accepts every passage.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassThroughScorer;

impl QualityScorer for PassThroughScorer {
    fn score(&self, _text: &str) -> Result<f64, BackendError> {
        Ok(1.0)
    }
}

/// Returns queued replies in order; used for fault injection.
#[derive(Debug, Default)]
pub struct ScriptedChat {
    replies: Mutex<VecDeque<Result<String, BackendError>>>,
    calls: AtomicUsize,
}

impl ScriptedChat {
    pub fn new(replies: impl IntoIterator<Item = Result<String, BackendError>>) -> Self {
        Self {
            replies: Mutex::new(replies.into_iter().collect()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatBackend for ScriptedChat {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let next = self
            .replies
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(BackendError::Transport("script exhausted".into())));
        next.map(|text| reply(req, text))
    }
}

fn reply(req: &ChatRequest, text: String) -> ChatResponse {
    let usage = TokenUsage {
        prompt_tokens: req.messages.iter().map(|m| char_len(&m.content) as u64).sum(),
        completion_tokens: char_len(&text) as u64,
    };
    ChatResponse {
        text,
        finish_reason: "stop".into(),
        usage,
    }
}

/// Templated chat model. It recognises the three prompt families the
/// pipeline sends (hierarchical query generation, topic intents, synonymy
/// judging) by their output schema and answers from the prompt content.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockChat {
    seed: u64,
}

struct Phrasing {
    passage: &'static str,
    sentence: &'static str,
}

const PHRASINGS: [Phrasing; 2] = [
    Phrasing {
        passage: "的主要内容是什么？",
        sentence: "的具体情况如何？",
    },
    Phrasing {
        passage: "讲了哪些要点？",
        sentence: "是怎么回事？",
    },
];

impl MockChat {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn phrasing(&self) -> &'static Phrasing {
        &PHRASINGS[(self.seed % PHRASINGS.len() as u64) as usize]
    }

    fn hierarchical(&self, prompt: &str) -> String {
        let sentences = json_string_arrays(prompt).into_iter().next().unwrap_or_default();
        let p = self.phrasing();
        let passage_query = sentences
            .iter()
            .map(|s| stem(s))
            .find(|s| char_len(s) >= 4)
            .map(|s| format!("{s}{}", p.passage))
            .unwrap_or_default();
        let sentence_queries: Vec<String> = sentences
            .iter()
            .map(|s| {
                let s = stem(s);
                if char_len(s) < 4 {
                    String::new()
                } else {
                    format!("{s}{}", p.sentence)
                }
            })
            .collect();
        json!({"passage_query": passage_query, "sentence_queries": sentence_queries}).to_string()
    }

    fn intents(&self, prompt: &str) -> String {
        let arrays = json_string_arrays(prompt);
        let keywords = arrays.first().cloned().unwrap_or_default();
        let titles = arrays.get(1).cloned().unwrap_or_default();
        let p = self.phrasing();
        let head: Vec<&str> = keywords.iter().take(3).map(String::as_str).collect();
        let intent = if head.is_empty() {
            "了解该主题的最新动态".to_string()
        } else {
            format!("了解{}相关主题的最新动态", head.join("、"))
        };
        let mut subqueries: Vec<String> = titles
            .iter()
            .take(3)
            .map(|t| format!("{}{}", stem(t), p.passage))
            .collect();
        if let Some(k) = keywords.first() {
            subqueries.push(format!("{k}方面有哪些最新变化？"));
        }
        if subqueries.is_empty() {
            subqueries.push(format!("{intent}？"));
        }
        json!([{"intent": intent, "subqueries": subqueries}]).to_string()
    }

    fn judge(&self, prompt: &str) -> String {
        let (a, b) = judged_pair(prompt).unwrap_or_default();
        let dice = bigram_dice(&a, &b);
        let rating = 1 + (4.0 * dice).round() as u32;
        format!("Score: {rating}. Rationale: character-bigram overlap {dice:.2}.")
    }
}

impl ChatBackend for MockChat {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        if req.messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages".into()));
        }
        let prompt = req.user_text();
        let text = if prompt.contains("\"sentence_queries\"") {
            self.hierarchical(&prompt)
        } else if prompt.contains("\"subqueries\"") {
            self.intents(&prompt)
        } else if prompt.contains("(5 points)") {
            self.judge(&prompt)
        } else {
            let mut bytes = self.seed.to_le_bytes().to_vec();
            bytes.extend_from_slice(prompt.as_bytes());
            format!("ack {:016x}", fnv1a64(&bytes))
        };
        Ok(reply(req, text))
    }
}

/// Trims whitespace and trailing sentence punctuation.
fn stem(s: &str) -> &str {
    s.trim()
        .trim_end_matches(['。', '！', '？', '；', '.', '!', '?', ';', '，', ','])
        .trim()
}

/// Every JSON array of strings embedded in `s`, in order of appearance.
fn json_string_arrays(s: &str) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(off) = s[pos..].find('[') {
        let start = pos + off;
        let mut stream = serde_json::Deserializer::from_str(&s[start..]).into_iter::<Vec<String>>();
        match stream.next() {
            Some(Ok(v)) => {
                pos = start + stream.byte_offset();
                out.push(v);
            }
            _ => pos = start + 1,
        }
    }
    out
}

/// The two quoted sentences on the first line that starts with `"`.
fn judged_pair(prompt: &str) -> Option<(String, String)> {
    let line = prompt.lines().find(|l| l.trim_start().starts_with('"'))?;
    let line = line.trim_start();
    let mut first = serde_json::Deserializer::from_str(line).into_iter::<String>();
    let a = first.next()?.ok()?;
    let rest = &line[first.byte_offset()..];
    let rest = &rest[rest.find('"')?..];
    let b = serde_json::Deserializer::from_str(rest)
        .into_iter::<String>()
        .next()?
        .ok()?;
    Some((a, b))
}

/// Table-driven stand-in used by tests that need exact classifier output.
pub fn keyword_table(entries: &[(&str, &str)]) -> KeywordClassifier {
    KeywordClassifier::new(
        entries
            .iter()
            .map(|(k, l)| (k.to_string(), IndustryLabel::new(*l)))
            .collect(),
    )
}

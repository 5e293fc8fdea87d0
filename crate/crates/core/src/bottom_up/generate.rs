use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{
    build_generation_prompt, complete_entities, merge_doc_queries, parse_generation_response,
    parse_lenient, HierarchicalQuerySet, PromptLanguage, Query, DEFAULT_REFERENTS,
};
use crate::corpus::{extract_company, CompanyPatterns, Document, PassageChunk};
use crate::gateway::{BackendError, Backends, DEFAULT_TEMPERATURE};

#[derive(Debug, Clone)]
pub struct BottomUpConfig {
    pub lang: PromptLanguage,
    pub temperature: f64,
    /// Re-asks after a reply that fails validation.
    pub retries: u32,
    pub referents: Vec<String>,
    pub company_patterns: CompanyPatterns,
}

impl Default for BottomUpConfig {
    fn default() -> Self {
        Self {
            lang: PromptLanguage::default(),
            temperature: DEFAULT_TEMPERATURE,
            retries: 3,
            referents: DEFAULT_REFERENTS.iter().map(|s| s.to_string()).collect(),
            company_patterns: CompanyPatterns::default(),
        }
    }
}

/// One chat call per attempt. A reply that fails validation is retried up
/// to `cfg.retries` times; after that the first schema-valid reply (or an
/// empty one) is padded/truncated to the sentence count and flagged.
/// Transport failures that survive the backend's own retries are returned.
pub fn generate_passage_queries(
    passage: &PassageChunk,
    backends: &Backends,
    cfg: &BottomUpConfig,
) -> Result<HierarchicalQuerySet, BackendError> {
    let n = passage.sentences.len();
    let mut req = build_generation_prompt(passage, cfg.lang).with_retries(backends.retries);
    req.temperature = cfg.temperature;
    let mut partial = None;
    for attempt in 0..=cfg.retries {
        let reply = backends.chat(&req)?;
        match parse_generation_response(&reply.text, n) {
            Ok(g) => {
                return Ok(HierarchicalQuerySet {
                    passage_id: passage.passage_id.clone(),
                    passage_query: g.passage_query,
                    sentence_queries: g.sentence_queries,
                    flagged: false,
                })
            }
            Err(e) => {
                log::warn!("{} attempt {}: {e}", passage.passage_id, attempt + 1);
                if partial.is_none() {
                    partial = parse_lenient(&reply.text).ok();
                }
            }
        }
    }
    let (passage_query, mut sentence_queries) = partial
        .map(|g| (g.passage_query, g.sentence_queries))
        .unwrap_or_default();
    sentence_queries.resize(n, String::new());
    log::warn!("{}: retry budget spent, output repaired and flagged", passage.passage_id);
    Ok(HierarchicalQuerySet {
        passage_id: passage.passage_id.clone(),
        passage_query,
        sentence_queries,
        flagged: true,
    })
}

#[derive(Debug, Clone, Default)]
pub struct BottomUpOutput {
    pub sets: Vec<HierarchicalQuerySet>,
    /// Merged and entity-completed, in corpus order.
    pub queries: Vec<Query>,
    pub empty_count: usize,
    pub completed_count: usize,
}

impl BottomUpOutput {
    pub fn flagged(&self) -> impl Iterator<Item = &str> {
        self.sets.iter().filter(|s| s.flagged).map(|s| s.passage_id.as_str())
    }
}

/// Generates, merges and entity-completes the queries of every passage.
pub fn run_bottom_up(
    docs: &[Document],
    passages: &[PassageChunk],
    backends: &Backends,
    cfg: &BottomUpConfig,
) -> Result<BottomUpOutput, BackendError> {
    let mut passages: Vec<&PassageChunk> = passages.iter().collect();
    passages.sort_by_key(|p| p.sort_key());
    let sets: Vec<HierarchicalQuerySet> = passages
        .par_iter()
        .map(|p| generate_passage_queries(p, backends, cfg))
        .collect::<Result<_, _>>()?;

    type DocGroup = (Vec<HierarchicalQuerySet>, Vec<PassageChunk>);
    let mut by_doc: BTreeMap<(usize, &str), DocGroup> = BTreeMap::new();
    for (p, s) in passages.iter().zip(&sets) {
        let entry = by_doc.entry((p.doc_ordinal, p.doc_id.as_str())).or_default();
        entry.0.push(s.clone());
        entry.1.push((*p).clone());
    }
    let companies: BTreeMap<&str, Option<String>> = docs
        .iter()
        .map(|d| {
            let c = extract_company(&d.title, d.company.as_deref(), &cfg.company_patterns);
            (d.doc_id.as_str(), c)
        })
        .collect();

    let mut out = BottomUpOutput::default();
    for ((_, doc_id), (doc_sets, doc_passages)) in by_doc {
        let merged = merge_doc_queries(doc_id, &doc_sets, &doc_passages);
        out.empty_count += merged.empty_count;
        let company = companies.get(doc_id).cloned().flatten();
        for q in merged.queries {
            let done = complete_entities(&q, company.as_deref(), &cfg.referents);
            out.completed_count += usize::from(done.text != q.text);
            out.queries.push(done);
        }
    }
    out.sets = sets;
    Ok(out)
}

//! Retrieval-dataset layout: corpus, per-subset queries and qrels, stats.

mod cost;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bottom_up::Query;
use crate::corpus::{Document, PassageChunk};
use crate::io::write_atomic;
use crate::relevance::{QrelSets, RelevanceLabel, SubsetName};
use crate::text::char_len;

pub use cost::{estimate_cost, CostEstimate, DEFAULT_TITLE_TOKENS};

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("{subset}: qrel references unknown query id {id}")]
    DanglingQuery { subset: String, id: String },
    #[error("{subset}: qrel references unknown corpus id {id}")]
    DanglingPassage { subset: String, id: String },
    #[error("{subset}: duplicate query id {id}")]
    DuplicateQuery { subset: String, id: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    #[serde(rename = "_id")]
    pub id: String,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    #[serde(rename = "_id")]
    pub id: String,
    pub text: String,
}

/// Corpus records sorted by id; the title is the source report's title.
pub fn corpus_records(passages: &[PassageChunk], docs: &[Document]) -> Vec<CorpusRecord> {
    let titles: BTreeMap<&str, &str> = docs.iter().map(|d| (d.doc_id.as_str(), d.title.as_str())).collect();
    let mut out: Vec<CorpusRecord> = passages
        .iter()
        .map(|p| CorpusRecord {
            id: p.passage_id.clone(),
            title: titles.get(p.doc_id.as_str()).unwrap_or(&"").to_string(),
            text: p.text.clone(),
        })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

pub fn render_corpus(records: &[CorpusRecord]) -> String {
    crate::io::to_jsonl(records)
}

pub fn emit_corpus(dir: &Path, records: &[CorpusRecord]) -> io::Result<()> {
    write_atomic(&dir.join("corpus.jsonl"), render_corpus(records).as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetBundle {
    pub name: SubsetName,
    /// Sorted by id.
    pub queries: Vec<QueryRecord>,
    /// Sorted by (query, passage).
    pub qrels: Vec<RelevanceLabel>,
}

/// One bundle per subset plus the union. A subset holds exactly the queries
/// that have labels in it; the union prefixes ids with the subset name.
pub fn build_bundles(queries: &[Query], sets: &QrelSets) -> Vec<SubsetBundle> {
    let text: BTreeMap<&str, &str> = queries.iter().map(|q| (q.query_id.as_str(), q.text.as_str())).collect();
    let mut bundles: Vec<SubsetBundle> = SubsetName::FIVE
        .iter()
        .map(|&name| {
            let mut qrels = sets.get(name).to_vec();
            qrels.sort_by(|a, b| a.key().cmp(&b.key()));
            let ids: BTreeSet<&str> = qrels.iter().map(|l| l.query_id.as_str()).collect();
            let queries = ids
                .into_iter()
                .filter_map(|id| {
                    Some(QueryRecord {
                        id: id.to_string(),
                        text: text.get(id)?.to_string(),
                    })
                })
                .collect();
            SubsetBundle { name, queries, qrels }
        })
        .collect();
    let mut all = SubsetBundle {
        name: SubsetName::All,
        queries: vec![],
        qrels: vec![],
    };
    for b in &bundles {
        let ns = |id: &str| format!("{}:{id}", b.name);
        all.queries.extend(b.queries.iter().map(|q| QueryRecord {
            id: ns(&q.id),
            text: q.text.clone(),
        }));
        all.qrels.extend(b.qrels.iter().map(|l| RelevanceLabel {
            query_id: ns(&l.query_id),
            ..l.clone()
        }));
    }
    all.queries.sort_by(|a, b| a.id.cmp(&b.id));
    all.qrels.sort_by(|a, b| a.key().cmp(&b.key()));
    bundles.push(all);
    bundles
}

/// Checks that ids are unique and every qrel resolves.
pub fn check_integrity(bundle: &SubsetBundle, corpus_ids: &BTreeSet<String>) -> Result<(), EmitError> {
    let subset = bundle.name.to_string();
    let mut ids = BTreeSet::new();
    for q in &bundle.queries {
        if !ids.insert(q.id.as_str()) {
            return Err(EmitError::DuplicateQuery { subset, id: q.id.clone() });
        }
    }
    for l in &bundle.qrels {
        if !ids.contains(l.query_id.as_str()) {
            return Err(EmitError::DanglingQuery { subset, id: l.query_id.clone() });
        }
        if !corpus_ids.contains(&l.passage_id) {
            return Err(EmitError::DanglingPassage { subset, id: l.passage_id.clone() });
        }
    }
    Ok(())
}

pub const QRELS_HEADER: &str = "query-id\tcorpus-id\tscore";

pub fn render_qrels(qrels: &[RelevanceLabel]) -> String {
    let mut s = format!("{QRELS_HEADER}\n");
    for l in qrels {
        let _ = writeln!(s, "{}\t{}\t1", l.query_id, l.passage_id);
    }
    s
}

/// Writes `{dir}/{subset}/queries.jsonl` and `qrels.tsv` after the integrity
/// check.
pub fn emit_subset(dir: &Path, bundle: &SubsetBundle, corpus_ids: &BTreeSet<String>) -> Result<(), EmitError> {
    check_integrity(bundle, corpus_ids)?;
    let sub = dir.join(bundle.name.as_str());
    write_atomic(&sub.join("queries.jsonl"), crate::io::to_jsonl(&bundle.queries).as_bytes())?;
    write_atomic(&sub.join("qrels.tsv"), render_qrels(&bundle.qrels).as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub subset: String,
    pub avg_query_len: f64,
    pub avg_doc_len: f64,
    pub avg_rel_per_query: f64,
    pub pair_count: usize,
}

pub const STATS_HEADER: &str = "subset\tavg_query_len\tavg_doc_len\tavg_rel_docs_per_query\tpair_count";

fn mean(values: impl Iterator<Item = usize>) -> f64 {
    let (sum, n) = values.fold((0usize, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// Lengths in characters; doc length over distinct referenced passages.
pub fn compute_stats(bundle: &SubsetBundle, passage_len: &BTreeMap<String, usize>) -> StatsRow {
    let qids: BTreeSet<&str> = bundle.qrels.iter().map(|l| l.query_id.as_str()).collect();
    let pids: BTreeSet<&str> = bundle.qrels.iter().map(|l| l.passage_id.as_str()).collect();
    StatsRow {
        subset: bundle.name.to_string(),
        avg_query_len: mean(bundle.queries.iter().map(|q| char_len(&q.text))),
        avg_doc_len: mean(pids.iter().map(|p| passage_len.get(*p).copied().unwrap_or(0))),
        avg_rel_per_query: if qids.is_empty() {
            0.0
        } else {
            bundle.qrels.len() as f64 / qids.len() as f64
        },
        pair_count: bundle.qrels.len(),
    }
}

pub fn render_stats(rows: &[StatsRow]) -> String {
    let mut s = format!("{STATS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{:.2}\t{:.2}\t{:.2}\t{}",
            r.subset, r.avg_query_len, r.avg_doc_len, r.avg_rel_per_query, r.pair_count
        );
    }
    s
}

/// Writes the whole dataset and returns its statistics.
pub fn emit_dataset(
    dir: &Path,
    corpus: &[CorpusRecord],
    bundles: &[SubsetBundle],
) -> Result<Vec<StatsRow>, EmitError> {
    let corpus_ids: BTreeSet<String> = corpus.iter().map(|c| c.id.clone()).collect();
    for b in bundles {
        check_integrity(b, &corpus_ids)?;
    }
    emit_corpus(dir, corpus)?;
    for b in bundles {
        emit_subset(dir, b, &corpus_ids)?;
    }
    let lens: BTreeMap<String, usize> = corpus.iter().map(|c| (c.id.clone(), char_len(&c.text))).collect();
    let rows: Vec<StatsRow> = bundles.iter().map(|b| compute_stats(b, &lens)).collect();
    write_atomic(&dir.join("stats.tsv"), render_stats(&rows).as_bytes())?;
    Ok(rows)
}

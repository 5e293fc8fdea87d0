//! Retrieval metrics over emitted subsets and cross-benchmark correlation.

mod pearson;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{CorpusRecord, QueryRecord, QRELS_HEADER};
use crate::gateway::{BackendError, Backends, EmbedVector};
use crate::relevance::SubsetName;

pub use pearson::{parse_result_matrix, pearson, pearson_matrix, render_matrix, CorrelationMatrix, ResultMatrix};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("need at least 3 shared models, found {0}")]
    TooFewModels(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Ranked `(passage_id, score)` per query.
pub type RunResult = BTreeMap<String, Vec<(String, f64)>>;
/// Relevant passage ids per query.
pub type Qrels = BTreeMap<String, BTreeSet<String>>;

fn rank(mut hits: Vec<(String, f64)>, k: usize) -> Vec<(String, f64)> {
    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut seen = BTreeSet::new();
    hits.retain(|(p, _)| seen.insert(p.clone()));
    hits.truncate(k);
    hits
}

/// Exact top-`k` by cosine of unit vectors, ties by passage id.
pub fn retrieve_embedded(
    queries: &[(String, EmbedVector)],
    corpus: &[(String, EmbedVector)],
    k: usize,
) -> RunResult {
    queries
        .par_iter()
        .map(|(qid, qv)| {
            let hits = corpus.iter().map(|(pid, pv)| (pid.clone(), qv.dot(pv))).collect();
            (qid.clone(), rank(hits, k))
        })
        .collect()
}

pub fn embed_all(items: &[(String, String)], backends: &Backends) -> Result<Vec<(String, EmbedVector)>, BackendError> {
    items
        .par_iter()
        .map(|(id, text)| Ok((id.clone(), backends.embed(text)?)))
        .collect()
}

pub fn brute_force_retrieve(
    queries: &[QueryRecord],
    corpus: &[CorpusRecord],
    backends: &Backends,
    k: usize,
) -> Result<RunResult, BackendError> {
    let q: Vec<(String, String)> = queries.iter().map(|q| (q.id.clone(), q.text.clone())).collect();
    let c: Vec<(String, String)> = corpus.iter().map(|c| (c.id.clone(), c.text.clone())).collect();
    Ok(retrieve_embedded(&embed_all(&q, backends)?, &embed_all(&c, backends)?, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    /// Queries averaged over.
    pub evaluated: usize,
    /// Run queries skipped for having no relevant passage.
    pub no_relevant: usize,
}

fn macro_average(run: &RunResult, qrels: &Qrels, per_query: impl Fn(&[(String, f64)], &BTreeSet<String>) -> f64) -> MetricValue {
    let empty = Vec::new();
    let mut total = 0.0;
    let mut evaluated = 0;
    for (qid, rel) in qrels.iter().filter(|(_, r)| !r.is_empty()) {
        total += per_query(run.get(qid).unwrap_or(&empty), rel);
        evaluated += 1;
    }
    let no_relevant = run.keys().filter(|q| qrels.get(*q).is_none_or(|r| r.is_empty())).count();
    MetricValue {
        value: if evaluated == 0 { 0.0 } else { total / evaluated as f64 },
        evaluated,
        no_relevant,
    }
}

pub fn recall_at_k(run: &RunResult, qrels: &Qrels, k: usize) -> MetricValue {
    macro_average(run, qrels, |ranked, rel| {
        let hit = ranked.iter().take(k).filter(|(p, _)| rel.contains(p)).count();
        hit as f64 / rel.len() as f64
    })
}

/// Binary gains, `1 / log2(rank + 1)` discount.
pub fn ndcg_at_k(run: &RunResult, qrels: &Qrels, k: usize) -> MetricValue {
    let discount = |i: usize| 1.0 / ((i + 2) as f64).log2();
    macro_average(run, qrels, |ranked, rel| {
        let dcg: f64 = ranked
            .iter()
            .take(k)
            .enumerate()
            .filter(|(_, (p, _))| rel.contains(p))
            .map(|(i, _)| discount(i))
            .sum();
        let idcg: f64 = (0..rel.len().min(k)).map(discount).sum();
        dcg / idcg
    })
}

/// `qid Q0 docid rank score tag` lines; ranks are recomputed from scores.
pub fn parse_trec_run(text: &str, k: usize) -> Result<RunResult, EvalError> {
    let mut raw: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        if f.len() != 6 {
            return Err(EvalError::Parse {
                line: i + 1,
                message: format!("expected 6 fields, got {}", f.len()),
            });
        }
        let score: f64 = f[4].parse().map_err(|_| EvalError::Parse {
            line: i + 1,
            message: format!("bad score {:?}", f[4]),
        })?;
        raw.entry(f[0].to_string()).or_default().push((f[2].to_string(), score));
    }
    Ok(raw.into_iter().map(|(q, hits)| (q, rank(hits, k))).collect())
}

pub fn render_trec_run(run: &RunResult, tag: &str) -> String {
    let mut s = String::new();
    for (q, hits) in run {
        for (i, (p, score)) in hits.iter().enumerate() {
            let _ = writeln!(s, "{q} Q0 {p} {} {score:.6} {tag}", i + 1);
        }
    }
    s
}

/// Reads a qrels TSV with the standard header; rows with score 0 are skipped.
pub fn parse_qrels(text: &str) -> Result<Qrels, EvalError> {
    let mut out = Qrels::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (i == 0 && line.trim() == QRELS_HEADER) {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(EvalError::Parse {
                line: i + 1,
                message: "expected query-id, corpus-id, score".into(),
            });
        }
        if f[2].trim().parse::<f64>().map_or(true, |s| s > 0.0) {
            out.entry(f[0].to_string()).or_default().insert(f[1].to_string());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub subset: String,
    pub metric: String,
    pub value: f64,
}

pub fn render_metrics(rows: &[MetricRow]) -> String {
    let mut s = String::from("model\tsubset\tmetric\tvalue\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{}\t{:.6}", r.model, r.subset, r.metric, r.value);
    }
    s
}

/// Recall@k and NDCG@k of the configured embedder on every subset in an
/// emitted dataset directory.
pub fn evaluate_dataset(dir: &Path, model: &str, backends: &Backends, k: usize) -> Result<Vec<MetricRow>, EvalError> {
    let corpus: Vec<CorpusRecord> = crate::io::read_jsonl(&dir.join("corpus.jsonl"))?;
    let c: Vec<(String, String)> = corpus.iter().map(|c| (c.id.clone(), c.text.clone())).collect();
    let corpus_vecs = embed_all(&c, backends)?;
    let mut rows = Vec::new();
    let subsets = SubsetName::FIVE.iter().chain([SubsetName::All].iter());
    for name in subsets {
        let sub = dir.join(name.as_str());
        if !sub.exists() {
            continue;
        }
        let queries: Vec<QueryRecord> = crate::io::read_jsonl(&sub.join("queries.jsonl"))?;
        let qrels = parse_qrels(&std::fs::read_to_string(sub.join("qrels.tsv"))?)?;
        let q: Vec<(String, String)> = queries.iter().map(|q| (q.id.clone(), q.text.clone())).collect();
        let run = retrieve_embedded(&embed_all(&q, backends)?, &corpus_vecs, k);
        for (metric, v) in [
            (format!("recall@{k}"), recall_at_k(&run, &qrels, k)),
            (format!("ndcg@{k}"), ndcg_at_k(&run, &qrels, k)),
        ] {
            if v.no_relevant > 0 {
                log::warn!("{name}: {} queries without relevant passages skipped", v.no_relevant);
            }
            rows.push(MetricRow {
                model: model.to_string(),
                subset: name.to_string(),
                metric,
                value: v.value,
            });
        }
    }
    Ok(rows)
}

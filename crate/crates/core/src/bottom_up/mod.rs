//! Per-passage hierarchical query generation.

mod entity;
mod generate;
mod parse;
mod prompt;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::PassageChunk;

pub use entity::{complete_entities, DEFAULT_REFERENTS};
pub use generate::{generate_passage_queries, run_bottom_up, BottomUpConfig, BottomUpOutput};
pub use parse::{extract_json, parse_generation_response, strip_code_fence, GeneratedQueries, ResponseError};
pub(crate) use parse::parse_lenient;
pub use prompt::{build_generation_prompt, generation_template, PromptLanguage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchicalQuerySet {
    pub passage_id: String,
    pub passage_query: String,
    pub sentence_queries: Vec<String>,
    /// Output was padded/truncated after the retry budget ran out.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryLevel {
    Sentence,
    Passage,
    Topic,
}

impl QueryLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            QueryLevel::Sentence => "sentence",
            QueryLevel::Passage => "passage",
            QueryLevel::Topic => "topic",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuerySource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub text: String,
    pub level: QueryLevel,
    #[serde(flatten)]
    pub source: QuerySource,
}

/// Queries of one document, in passage order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocQueries {
    pub doc_id: String,
    pub queries: Vec<Query>,
    /// Empty strings dropped during the merge.
    pub empty_count: usize,
}

/// Turns generated sets into Query records. A passage query takes the
/// passage id as its query id and a sentence query the sentence id, so ids
/// are stable across runs. Sets without a matching passage are ignored.
pub fn merge_doc_queries(
    doc_id: &str,
    sets: &[HierarchicalQuerySet],
    passages: &[PassageChunk],
) -> DocQueries {
    let by_id: BTreeMap<&str, &HierarchicalQuerySet> =
        sets.iter().map(|s| (s.passage_id.as_str(), s)).collect();
    let mut ordered: Vec<&PassageChunk> = passages.iter().filter(|p| p.doc_id == doc_id).collect();
    ordered.sort_by_key(|p| p.sort_key());

    let mut out = DocQueries {
        doc_id: doc_id.to_string(),
        ..Default::default()
    };
    for p in ordered {
        let Some(set) = by_id.get(p.passage_id.as_str()) else {
            continue;
        };
        let source = |sentence_id: Option<&str>| QuerySource {
            doc_id: Some(doc_id.to_string()),
            passage_id: Some(p.passage_id.clone()),
            sentence_id: sentence_id.map(str::to_string),
            topic_id: None,
        };
        let pq = set.passage_query.trim();
        if pq.is_empty() {
            out.empty_count += 1;
        } else {
            out.queries.push(Query {
                query_id: p.passage_id.clone(),
                text: pq.to_string(),
                level: QueryLevel::Passage,
                source: source(None),
            });
        }
        for (s, q) in p.sentences.iter().zip(&set.sentence_queries) {
            let q = q.trim();
            if q.is_empty() {
                out.empty_count += 1;
                continue;
            }
            out.queries.push(Query {
                query_id: s.sentence_id.clone(),
                text: q.to_string(),
                level: QueryLevel::Sentence,
                source: source(Some(&s.sentence_id)),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{passage_id, sentence_id, SentenceChunk};

    pub(crate) fn passage(doc: &str, ord: usize, sentences: &[&str]) -> PassageChunk {
        let pid = passage_id(doc, ord);
        let text: String = sentences.concat();
        PassageChunk {
            sentences: sentences
                .iter()
                .enumerate()
                .map(|(i, s)| SentenceChunk {
                    sentence_id: sentence_id(&pid, i),
                    ordinal: i,
                    text: s.to_string(),
                    char_len: s.chars().count(),
                    unsplittable: false,
                })
                .collect(),
            passage_id: pid,
            doc_id: doc.into(),
            doc_ordinal: 0,
            ordinal: ord,
            char_len: text.chars().count(),
            text,
        }
    }

    fn set(pid: &str, pq: &str, sq: &[&str]) -> HierarchicalQuerySet {
        HierarchicalQuerySet {
            passage_id: pid.into(),
            passage_query: pq.into(),
            sentence_queries: sq.iter().map(|s| s.to_string()).collect(),
            flagged: false,
        }
    }

    #[test]
    fn two_passages_six_queries() {
        let ps = [passage("doc0", 0, &["甲。", "乙。"]), passage("doc0", 1, &["丙。", "丁。"])];
        let sets = [set("doc0-p1", "p1", &["c", "d"]), set("doc0-p0", "p0", &["a", "b"])];
        let m = merge_doc_queries("doc0", &sets, &ps);
        assert_eq!(m.queries.len(), 6);
        assert_eq!(m.empty_count, 0);
        let ids: Vec<_> = m.queries.iter().map(|q| q.query_id.as_str()).collect();
        assert_eq!(ids, ["doc0-p0", "doc0-p0-s0", "doc0-p0-s1", "doc0-p1", "doc0-p1-s0", "doc0-p1-s1"]);
    }

    #[test]
    fn empty_sentence_queries_excluded() {
        let ps = [passage("doc0", 0, &["甲。", "乙。"])];
        let m = merge_doc_queries("doc0", &[set("doc0-p0", "p0", &["", " "])], &ps);
        assert_eq!(m.queries.len(), 1);
        assert_eq!(m.queries[0].level, QueryLevel::Passage);
        assert_eq!(m.empty_count, 2);
    }

    #[test]
    fn query_jsonl_shape() {
        let ps = [passage("doc0", 1, &["甲。", "乙。", "丙。"])];
        let m = merge_doc_queries("doc0", &[set("doc0-p1", "", &["", "", "q"])], &ps);
        let line = serde_json::to_string(&m.queries[0]).unwrap();
        assert_eq!(
            line,
            r#"{"query_id":"doc0-p1-s2","text":"q","level":"sentence","doc_id":"doc0","passage_id":"doc0-p1","sentence_id":"doc0-p1-s2"}"#
        );
        let back: Query = serde_json::from_str(&line).unwrap();
        assert_eq!(back, m.queries[0]);
    }
}

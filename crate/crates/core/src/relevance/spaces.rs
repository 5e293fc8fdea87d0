use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bottom_up::{Query, QueryLevel};
use crate::top_down::{IntentRecord, TitleAssignment, TopicTree};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpaceMember {
    pub query_id: String,
    pub text: String,
    pub passage_id: String,
}

impl SpaceMember {
    fn of(q: &Query) -> Option<Self> {
        Some(Self {
            query_id: q.query_id.clone(),
            text: q.text.clone(),
            passage_id: q.source.passage_id.clone()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpaceKind {
    /// Unordered pairs of members from different passages.
    Undirected { members: Vec<SpaceMember> },
    /// Every (subquery, passage query) pair of one intent.
    Directed {
        intent_id: String,
        /// `(subquery id, text)`
        subqueries: Vec<(String, String)>,
        targets: Vec<SpaceMember>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraversalSpace {
    /// doc id, subtree topic id or intent's topic id.
    pub id: String,
    pub level: QueryLevel,
    pub kind: SpaceKind,
}

/// One pair to score. `a` is always the lexicographically smaller query id
/// for undirected spaces and the subquery for directed ones.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CandidatePair {
    pub a_id: String,
    pub a_text: String,
    pub a_passage: Option<String>,
    pub b: SpaceMember,
    /// Intent that gains the label on a directed pair.
    pub intent_id: Option<String>,
}

impl TraversalSpace {
    /// Candidate pairs in deterministic order.
    pub fn pairs(&self) -> Vec<CandidatePair> {
        match &self.kind {
            SpaceKind::Undirected { members } => {
                let mut out = Vec::new();
                for (i, a) in members.iter().enumerate() {
                    for b in &members[i + 1..] {
                        if a.passage_id != b.passage_id {
                            out.push(CandidatePair {
                                a_id: a.query_id.clone(),
                                a_text: a.text.clone(),
                                a_passage: Some(a.passage_id.clone()),
                                b: b.clone(),
                                intent_id: None,
                            });
                        }
                    }
                }
                out
            }
            SpaceKind::Directed { intent_id, subqueries, targets } => subqueries
                .iter()
                .flat_map(|(sid, stext)| {
                    targets.iter().map(move |t| CandidatePair {
                        a_id: sid.clone(),
                        a_text: stext.clone(),
                        a_passage: None,
                        b: t.clone(),
                        intent_id: Some(intent_id.clone()),
                    })
                })
                .collect(),
        }
    }

    /// Query ids a given query is compared against inside this space.
    pub fn candidates(&self, query_id: &str) -> Vec<String> {
        match &self.kind {
            SpaceKind::Undirected { members } => {
                let Some(me) = members.iter().find(|m| m.query_id == query_id) else {
                    return vec![];
                };
                members
                    .iter()
                    .filter(|m| m.passage_id != me.passage_id)
                    .map(|m| m.query_id.clone())
                    .collect()
            }
            SpaceKind::Directed { subqueries, targets, .. } => {
                if subqueries.iter().any(|(id, _)| id == query_id) {
                    targets.iter().map(|t| t.query_id.clone()).collect()
                } else {
                    vec![]
                }
            }
        }
    }
}

fn sorted(mut v: Vec<SpaceMember>) -> Vec<SpaceMember> {
    v.sort();
    v
}

/// Sentence queries grouped by document.
pub fn sentence_spaces(queries: &[Query]) -> Vec<TraversalSpace> {
    let mut by_doc: BTreeMap<String, Vec<SpaceMember>> = BTreeMap::new();
    for q in queries.iter().filter(|q| q.level == QueryLevel::Sentence) {
        if let (Some(doc), Some(m)) = (q.source.doc_id.clone(), SpaceMember::of(q)) {
            by_doc.entry(doc).or_default().push(m);
        }
    }
    by_doc
        .into_iter()
        .map(|(id, members)| TraversalSpace {
            id,
            level: QueryLevel::Sentence,
            kind: SpaceKind::Undirected { members: sorted(members) },
        })
        .collect()
}

/// Passage queries grouped by their document's max same-industry subtree.
/// Also returns documents that have no subtree and therefore no space.
pub fn passage_spaces(queries: &[Query], assignments: &[TitleAssignment]) -> (Vec<TraversalSpace>, Vec<String>) {
    let subtree: BTreeMap<&str, &str> = assignments
        .iter()
        .filter_map(|a| Some((a.doc_id.as_str(), a.subtree.as_deref()?)))
        .collect();
    let mut groups: BTreeMap<String, Vec<SpaceMember>> = BTreeMap::new();
    let mut unassigned = BTreeSet::new();
    for q in queries.iter().filter(|q| q.level == QueryLevel::Passage) {
        let Some(doc) = q.source.doc_id.as_deref() else { continue };
        match (subtree.get(doc), SpaceMember::of(q)) {
            (Some(s), Some(m)) => groups.entry(s.to_string()).or_default().push(m),
            _ => {
                unassigned.insert(doc.to_string());
            }
        }
    }
    if !unassigned.is_empty() {
        log::warn!("{} document(s) without a topic subtree; passage space empty", unassigned.len());
    }
    let spaces = groups
        .into_iter()
        .map(|(id, members)| TraversalSpace {
            id,
            level: QueryLevel::Passage,
            kind: SpaceKind::Undirected { members: sorted(members) },
        })
        .collect();
    (spaces, unassigned.into_iter().collect())
}

/// Each intent's subqueries against the passage queries of documents in the
/// intent's topic. Dedup'd titles bring their duplicates along.
pub fn topic_spaces(
    queries: &[Query],
    tree: &TopicTree,
    intents: &[IntentRecord],
    assignments: &[TitleAssignment],
) -> Vec<TraversalSpace> {
    let mut docs_of_record: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for a in assignments {
        if let Some(r) = a.title_doc_id.as_deref() {
            docs_of_record.entry(r).or_default().push(&a.doc_id);
        }
    }
    let mut passage_queries: BTreeMap<&str, Vec<SpaceMember>> = BTreeMap::new();
    for q in queries.iter().filter(|q| q.level == QueryLevel::Passage) {
        if let (Some(doc), Some(m)) = (q.source.doc_id.as_deref(), SpaceMember::of(q)) {
            passage_queries.entry(doc).or_default().push(m);
        }
    }
    intents
        .iter()
        .filter_map(|i| {
            let node = tree.get(&i.topic_id)?;
            let mut targets = Vec::new();
            for rec in &node.members {
                let docs = docs_of_record.get(rec.as_str()).cloned().unwrap_or_else(|| vec![rec.as_str()]);
                for d in docs {
                    targets.extend(passage_queries.get(d).cloned().unwrap_or_default());
                }
            }
            let subqueries = i
                .subqueries
                .iter()
                .enumerate()
                .map(|(k, s)| (format!("{}-s{k}", i.intent_id), s.clone()))
                .collect();
            Some(TraversalSpace {
                id: i.topic_id.clone(),
                level: QueryLevel::Topic,
                kind: SpaceKind::Directed {
                    intent_id: i.intent_id.clone(),
                    subqueries,
                    targets: sorted(targets),
                },
            })
        })
        .collect()
}

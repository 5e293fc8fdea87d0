//! Relevance labels: direct provenance plus reranker-mined positives.

mod spaces;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bottom_up::{Query, QueryLevel};
use crate::gateway::{BackendError, Backends};

pub use spaces::{passage_spaces, sentence_spaces, topic_spaces, CandidatePair, SpaceKind, SpaceMember, TraversalSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    /// Q<D
    Subset,
    /// Q=D
    Equivalent,
    /// Q>D
    Superset,
}

impl RelationKind {
    pub fn for_level(level: QueryLevel) -> Self {
        match level {
            QueryLevel::Sentence => RelationKind::Subset,
            QueryLevel::Passage => RelationKind::Equivalent,
            QueryLevel::Topic => RelationKind::Superset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Direct,
    Mined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceLabel {
    pub query_id: String,
    pub passage_id: String,
    pub kind: RelationKind,
    pub provenance: Provenance,
    pub score: f64,
}

impl RelevanceLabel {
    pub fn key(&self) -> (&str, &str) {
        (&self.query_id, &self.passage_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub query_a_id: String,
    pub query_b_id: String,
    pub text_a: String,
    pub text_b: String,
    pub score: f64,
    pub level: QueryLevel,
    pub space_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    pub threshold: f64,
    pub audit_floor: f64,
    pub max_pairs_per_space: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            threshold: 0.99,
            audit_floor: 0.85,
            max_pairs_per_space: 250_000,
        }
    }
}

impl MiningConfig {
    /// Every violated bound, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.0..=1.0).contains(&self.threshold) {
            v.push(format!("mining.threshold = {} outside [0, 1]", self.threshold));
        }
        if !(0.0..=1.0).contains(&self.audit_floor) {
            v.push(format!("mining.audit_floor = {} outside [0, 1]", self.audit_floor));
        }
        if self.audit_floor >= self.threshold {
            v.push(format!(
                "mining.audit_floor ({}) must be below mining.threshold ({})",
                self.audit_floor, self.threshold
            ));
        }
        if self.max_pairs_per_space == 0 {
            v.push("mining.max_pairs_per_space must be positive".into());
        }
        v
    }
}

/// One label per sentence or passage query pointing at its source passage.
pub fn direct_map(queries: &[Query]) -> Vec<RelevanceLabel> {
    let mut out: Vec<RelevanceLabel> = queries
        .iter()
        .filter(|q| q.level != QueryLevel::Topic && !q.text.trim().is_empty())
        .filter_map(|q| {
            Some(RelevanceLabel {
                query_id: q.query_id.clone(),
                passage_id: q.source.passage_id.clone()?,
                kind: RelationKind::for_level(q.level),
                provenance: Provenance::Direct,
                score: 1.0,
            })
        })
        .collect();
    sort_labels(&mut out);
    out
}

pub fn sort_labels(labels: &mut [RelevanceLabel]) {
    labels.sort_by(|a, b| a.key().cmp(&b.key()));
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MiningOutput {
    pub labels: Vec<RelevanceLabel>,
    /// Pairs at or above the audit floor.
    pub audit: Vec<ScoredPair>,
    pub scored_pairs: usize,
    pub truncated_spaces: Vec<String>,
}

/// Scores every candidate pair of `spaces` once and turns pairs at or above
/// the threshold into labels. Undirected pairs label both queries with the
/// other's passage; directed pairs label the intent with the target passage.
pub fn mine_level(
    level: QueryLevel,
    spaces: &[TraversalSpace],
    cfg: &MiningConfig,
    backends: &Backends,
) -> Result<MiningOutput, BackendError> {
    let mut out = MiningOutput::default();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let mut jobs: Vec<(&str, CandidatePair)> = Vec::new();
    for s in spaces.iter().filter(|s| s.level == level) {
        let mut pairs = s.pairs();
        if pairs.len() > cfg.max_pairs_per_space {
            log::warn!(
                "{} space {} has {} pairs; truncated to {}",
                level.as_str(),
                s.id,
                pairs.len(),
                cfg.max_pairs_per_space
            );
            pairs.truncate(cfg.max_pairs_per_space);
            out.truncated_spaces.push(s.id.clone());
        }
        for p in pairs {
            if seen.insert((p.a_id.clone(), p.b.query_id.clone())) {
                jobs.push((s.id.as_str(), p));
            }
        }
    }
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|(_, p)| backends.rerank(&p.a_text, &p.b.text).map(|s| s.value()))
        .collect::<Result<_, _>>()?;
    out.scored_pairs = jobs.len();

    let kind = RelationKind::for_level(level);
    let mut best: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut add = |q: &str, p: &str, score: f64| {
        let e = best.entry((q.to_string(), p.to_string())).or_insert(score);
        *e = e.max(score);
    };
    for ((space, p), score) in jobs.iter().zip(scores) {
        if score >= cfg.audit_floor {
            out.audit.push(ScoredPair {
                query_a_id: p.a_id.clone(),
                query_b_id: p.b.query_id.clone(),
                text_a: p.a_text.clone(),
                text_b: p.b.text.clone(),
                score,
                level,
                space_id: space.to_string(),
            });
        }
        if score < cfg.threshold {
            continue;
        }
        match (&p.intent_id, &p.a_passage) {
            (Some(intent), _) => add(intent, &p.b.passage_id, score),
            (None, Some(a_passage)) => {
                add(&p.a_id, &p.b.passage_id, score);
                add(&p.b.query_id, a_passage, score);
            }
            (None, None) => {}
        }
    }
    out.labels = best
        .into_iter()
        .map(|((query_id, passage_id), score)| RelevanceLabel {
            query_id,
            passage_id,
            kind,
            provenance: Provenance::Mined,
            score,
        })
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SubsetName {
    #[serde(rename = "sentence")]
    Sentence,
    #[serde(rename = "sentence-mined")]
    SentenceMined,
    #[serde(rename = "passage")]
    Passage,
    #[serde(rename = "passage-mined")]
    PassageMined,
    #[serde(rename = "topic")]
    Topic,
    #[serde(rename = "all")]
    All,
}

impl SubsetName {
    pub const FIVE: [SubsetName; 5] = [
        SubsetName::Sentence,
        SubsetName::SentenceMined,
        SubsetName::Passage,
        SubsetName::PassageMined,
        SubsetName::Topic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SubsetName::Sentence => "sentence",
            SubsetName::SentenceMined => "sentence-mined",
            SubsetName::Passage => "passage",
            SubsetName::PassageMined => "passage-mined",
            SubsetName::Topic => "topic",
            SubsetName::All => "all",
        }
    }

    /// Level of the queries in this subset; `None` for the union.
    pub fn level(self) -> Option<QueryLevel> {
        match self {
            SubsetName::Sentence | SubsetName::SentenceMined => Some(QueryLevel::Sentence),
            SubsetName::Passage | SubsetName::PassageMined => Some(QueryLevel::Passage),
            SubsetName::Topic => Some(QueryLevel::Topic),
            SubsetName::All => None,
        }
    }
}

impl std::fmt::Display for SubsetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Label sets of the five subsets, each sorted by (query, passage).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QrelSets {
    pub sets: BTreeMap<SubsetName, Vec<RelevanceLabel>>,
}

impl QrelSets {
    pub fn get(&self, name: SubsetName) -> &[RelevanceLabel] {
        self.sets.get(&name).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn of_kind(ls: &[RelevanceLabel], k: RelationKind) -> Vec<&RelevanceLabel> {
    ls.iter().filter(|l| l.kind == k).collect()
}

fn union_preferring_direct(direct: &[&RelevanceLabel], mined: &[&RelevanceLabel]) -> Vec<RelevanceLabel> {
    let mut out: BTreeMap<(String, String), RelevanceLabel> = BTreeMap::new();
    for l in direct.iter().chain(mined) {
        let k = (l.query_id.clone(), l.passage_id.clone());
        match out.get(&k) {
            Some(prev) if prev.provenance == Provenance::Direct => {}
            Some(prev) if l.provenance == Provenance::Mined && prev.score >= l.score => {}
            _ => {
                out.insert(k, (*l).clone());
            }
        }
    }
    out.into_values().collect()
}

/// Splits labels into the five subsets. Mined subsets keep only queries with
/// at least one mined label and include those queries' direct labels.
pub fn assemble_qrels(direct: &[RelevanceLabel], mined: &[RelevanceLabel]) -> QrelSets {
    let mut sets = BTreeMap::new();
    for (plain, with_mined, kind) in [
        (SubsetName::Sentence, SubsetName::SentenceMined, RelationKind::Subset),
        (SubsetName::Passage, SubsetName::PassageMined, RelationKind::Equivalent),
    ] {
        let d = of_kind(direct, kind);
        let m = of_kind(mined, kind);
        let mined_queries: BTreeSet<&str> = m.iter().map(|l| l.query_id.as_str()).collect();
        sets.insert(plain, union_preferring_direct(&d, &[]));
        let d_restricted: Vec<&RelevanceLabel> =
            d.into_iter().filter(|l| mined_queries.contains(l.query_id.as_str())).collect();
        sets.insert(with_mined, union_preferring_direct(&d_restricted, &m));
    }
    let topic_direct = of_kind(direct, RelationKind::Superset);
    sets.insert(SubsetName::Topic, union_preferring_direct(&topic_direct, &of_kind(mined, RelationKind::Superset)));
    QrelSets { sets }
}

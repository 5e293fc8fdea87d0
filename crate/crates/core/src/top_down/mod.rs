//! Cross-document topics from report titles.

mod ctfidf;
mod hdbscan;
mod intents;
mod time;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bottom_up::{PromptLanguage, Query, QueryLevel, QuerySource};
use crate::corpus::Document;
use crate::gateway::{BackendError, Backends, FailurePolicy, IndustryLabel, DEFAULT_TEMPERATURE};
use crate::text::cjk_count;

pub use ctfidf::{ctfidf_keywords, tokenize, ClassStats};
pub use hdbscan::{cluster_topics, core_distances, distance_matrix, euclidean, mutual_reachability, ClusterNode, Clustering};
pub use intents::{build_intent_prompt, generate_intents, intent_template, parse_intent_response, IntentRecord};
pub use time::{build_features, encode_days, encode_time, TemporalEncoding, DEFAULT_TEMPORAL_WEIGHT, PERIODS_DAYS};

pub const MIN_TITLE_CJK: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitleRecord {
    pub doc_id: String,
    pub title: String,
    pub publish_date: NaiveDate,
    pub industry: IndustryLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TitleCollection {
    pub records: Vec<TitleRecord>,
    /// Docs whose title has too few CJK characters.
    pub too_short: Vec<String>,
    /// Dropped duplicate doc id -> doc id of the kept record.
    pub duplicate_of: BTreeMap<String, String>,
}

/// Keeps titles with at least five CJK characters, first occurrence of each
/// exact title, and labels each with an industry.
pub fn collect_titles(
    docs: &[Document],
    backends: &Backends,
    policy: FailurePolicy,
) -> Result<TitleCollection, BackendError> {
    let mut ordered: Vec<&Document> = docs.iter().collect();
    ordered.sort_by_key(|d| d.ordinal);
    let mut out = TitleCollection::default();
    let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
    let mut kept = Vec::new();
    for d in ordered {
        let title = d.title.trim();
        if cjk_count(title) < MIN_TITLE_CJK {
            out.too_short.push(d.doc_id.clone());
        } else if let Some(first) = seen.get(title) {
            out.duplicate_of.insert(d.doc_id.clone(), first.to_string());
        } else {
            seen.insert(title, &d.doc_id);
            kept.push(d);
        }
    }
    out.records = kept
        .par_iter()
        .map(|d| {
            Ok(TitleRecord {
                doc_id: d.doc_id.clone(),
                title: d.title.trim().to_string(),
                publish_date: d.publish_date,
                industry: backends.classify_industry(d.title.trim(), policy)?,
            })
        })
        .collect::<Result<_, BackendError>>()?;
    Ok(out)
}

/// Label held by strictly more than two thirds of `labels`, else none.
pub fn dominant_industry<'a>(labels: impl IntoIterator<Item = &'a IndustryLabel>) -> IndustryLabel {
    let mut counts: BTreeMap<&IndustryLabel, usize> = BTreeMap::new();
    let mut total = 0;
    for l in labels {
        *counts.entry(l).or_insert(0) += 1;
        total += 1;
    }
    counts
        .into_iter()
        .find(|(_, c)| 3 * c > 2 * total)
        .map(|(l, _)| l.clone())
        .unwrap_or_else(IndustryLabel::none)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicNode {
    pub topic_id: String,
    pub parent_id: Option<String>,
    pub children: Vec<String>,
    pub members: Vec<String>,
    pub keywords: Vec<String>,
    pub dominant_industry: IndustryLabel,
    pub persistence: f64,
    /// Titles closest to the feature centroid.
    pub representatives: Vec<String>,
}

impl TopicNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopicTree {
    /// Preorder, root first.
    pub nodes: Vec<TopicNode>,
}

impl TopicTree {
    pub fn get(&self, topic_id: &str) -> Option<&TopicNode> {
        self.nodes.iter().find(|n| n.topic_id == topic_id)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TopicNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Ascends from `leaf` while the ancestor's dominant industry equals the
    /// leaf's; a leaf without a dominant industry is its own answer.
    pub fn max_same_industry_subtree<'a>(&'a self, leaf: &'a TopicNode) -> &'a TopicNode {
        let target = &leaf.dominant_industry;
        if target.is_none() {
            return leaf;
        }
        let mut best = leaf;
        while let Some(p) = best.parent_id.as_deref().and_then(|p| self.get(p)) {
            if &p.dominant_industry != target {
                break;
            }
            best = p;
        }
        best
    }
}

/// Up to `k` indices of `members` nearest (cosine) to their centroid, ties
/// by doc id.
pub fn representative_titles(
    members: &[usize],
    features: &[Vec<f64>],
    doc_ids: &[&str],
    k: usize,
) -> Vec<usize> {
    if members.is_empty() {
        return vec![];
    }
    let dim = features[members[0]].len();
    let mut centroid = vec![0.0; dim];
    for m in members {
        for (c, x) in centroid.iter_mut().zip(&features[*m]) {
            *c += x;
        }
    }
    let cnorm = centroid.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cosine = |v: &[f64]| {
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vn == 0.0 || cnorm == 0.0 {
            return 0.0;
        }
        v.iter().zip(&centroid).map(|(a, b)| a * b).sum::<f64>() / (vn * cnorm)
    };
    let mut scored: Vec<(f64, usize)> = members.iter().map(|m| (cosine(&features[*m]), *m)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| doc_ids[a.1].cmp(doc_ids[b.1])));
    scored.into_iter().take(k).map(|(_, m)| m).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopDownConfig {
    pub min_cluster_size: usize,
    pub temporal_weight: f64,
    /// Defaults to the latest publish date among the titles.
    pub reference_date: Option<NaiveDate>,
    pub top_k_keywords: usize,
    pub representatives: usize,
    pub lang: PromptLanguage,
    pub temperature: f64,
    pub retries: u32,
    pub on_classifier_failure: FailurePolicy,
}

impl Default for TopDownConfig {
    fn default() -> Self {
        Self {
            min_cluster_size: 5,
            temporal_weight: DEFAULT_TEMPORAL_WEIGHT,
            reference_date: None,
            top_k_keywords: 10,
            representatives: 5,
            lang: PromptLanguage::En,
            temperature: DEFAULT_TEMPERATURE,
            retries: 3,
            on_classifier_failure: FailurePolicy::Fallback,
        }
    }
}

pub const FLAG_SHORT_TITLE: &str = "short_title";
pub const FLAG_DUPLICATE_TITLE: &str = "duplicate_title";
pub const FLAG_NOISE: &str = "noise";
pub const FLAG_SINGLE_TOPIC: &str = "too_few_titles";

/// Where a document's title landed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitleAssignment {
    pub doc_id: String,
    /// Record the doc's title maps to (itself unless deduplicated).
    pub title_doc_id: Option<String>,
    pub leaf: Option<String>,
    /// Max same-industry subtree, or a `noise-{doc}` pseudo-topic.
    pub subtree: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub titles: Vec<TitleRecord>,
    pub tree: TopicTree,
    /// One per input document, corpus order.
    pub assignments: Vec<TitleAssignment>,
    pub reference_date: Option<NaiveDate>,
}

/// Titles, features, clustering, keywords, dominant industries and
/// subtree assignment.
pub fn build_topic_model(
    docs: &[Document],
    backends: &Backends,
    cfg: &TopDownConfig,
) -> Result<TopicModel, BackendError> {
    let titles = collect_titles(docs, backends, cfg.on_classifier_failure)?;
    let recs = &titles.records;
    let reference = cfg.reference_date.or_else(|| recs.iter().map(|r| r.publish_date).max());
    let features: Vec<Vec<f64>> = recs
        .par_iter()
        .map(|r| {
            let e = backends.embed(&r.title)?;
            let t = encode_time(r.publish_date, reference.unwrap_or(r.publish_date));
            Ok(build_features(&e.values, &t, cfg.temporal_weight))
        })
        .collect::<Result<_, BackendError>>()?;
    let clustering = cluster_topics(&features, cfg.min_cluster_size);
    let doc_ids: Vec<&str> = recs.iter().map(|r| r.doc_id.as_str()).collect();

    let tokens: Vec<Vec<String>> = recs.iter().map(|r| tokenize(&r.title)).collect();
    let class_tokens = |members: &[usize]| -> Vec<String> {
        members.iter().flat_map(|m| tokens[*m].iter().cloned()).collect()
    };
    let leaf_classes: Vec<Vec<String>> = clustering
        .leaves()
        .iter()
        .map(|l| class_tokens(&clustering.nodes[*l].members))
        .collect();
    let stats = ClassStats::from_classes(&leaf_classes);

    let topic_id = |i: usize| format!("t{i}");
    let nodes: Vec<TopicNode> = clustering
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| TopicNode {
            topic_id: topic_id(i),
            parent_id: n.parent.map(topic_id),
            children: n.children.iter().map(|c| topic_id(*c)).collect(),
            members: n.members.iter().map(|m| doc_ids[*m].to_string()).collect(),
            keywords: stats
                .top_terms(&class_tokens(&n.members), cfg.top_k_keywords)
                .into_iter()
                .map(|(t, _)| t)
                .collect(),
            dominant_industry: dominant_industry(n.members.iter().map(|m| &recs[*m].industry)),
            persistence: n.persistence,
            representatives: representative_titles(&n.members, &features, &doc_ids, cfg.representatives)
                .into_iter()
                .map(|m| recs[m].title.clone())
                .collect(),
        })
        .collect();
    let tree = TopicTree { nodes };

    let by_record: BTreeMap<&str, usize> = doc_ids.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let short: BTreeSet<&str> = titles.too_short.iter().map(String::as_str).collect();
    let mut ordered: Vec<&Document> = docs.iter().collect();
    ordered.sort_by_key(|d| d.ordinal);
    let assignments = ordered
        .iter()
        .map(|d| {
            let mut a = TitleAssignment {
                doc_id: d.doc_id.clone(),
                ..Default::default()
            };
            if short.contains(d.doc_id.as_str()) {
                a.flags.push(FLAG_SHORT_TITLE.into());
                return a;
            }
            let rec_doc = match titles.duplicate_of.get(&d.doc_id) {
                Some(first) => {
                    a.flags.push(FLAG_DUPLICATE_TITLE.into());
                    first.as_str()
                }
                None => d.doc_id.as_str(),
            };
            a.title_doc_id = Some(rec_doc.to_string());
            if clustering.degenerate {
                a.flags.push(FLAG_SINGLE_TOPIC.into());
            }
            match clustering.labels[by_record[rec_doc]] {
                Some(leaf) => {
                    let leaf = &tree.nodes[leaf];
                    a.leaf = Some(leaf.topic_id.clone());
                    a.subtree = Some(tree.max_same_industry_subtree(leaf).topic_id.clone());
                }
                None => {
                    a.flags.push(FLAG_NOISE.into());
                    a.subtree = Some(format!("noise-{rec_doc}"));
                }
            }
            a
        })
        .collect();
    Ok(TopicModel {
        titles: titles.records,
        tree,
        assignments,
        reference_date: reference,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntentOutput {
    pub intents: Vec<IntentRecord>,
    /// Topics whose replies never validated.
    pub skipped: Vec<String>,
}

impl IntentOutput {
    /// Intents as topic-level queries.
    pub fn queries(&self) -> Vec<Query> {
        self.intents
            .iter()
            .map(|i| Query {
                query_id: i.intent_id.clone(),
                text: i.intent.clone(),
                level: QueryLevel::Topic,
                source: QuerySource {
                    topic_id: Some(i.topic_id.clone()),
                    ..Default::default()
                },
            })
            .collect()
    }
}

/// Intents for every leaf topic.
pub fn generate_topic_intents(
    tree: &TopicTree,
    backends: &Backends,
    cfg: &TopDownConfig,
) -> Result<IntentOutput, BackendError> {
    let leaves: Vec<&TopicNode> = tree.leaves().collect();
    let results: Vec<Option<Vec<IntentRecord>>> = leaves
        .par_iter()
        .map(|n| {
            generate_intents(
                &n.topic_id,
                &n.keywords,
                &n.representatives,
                backends,
                cfg.lang,
                cfg.temperature,
                cfg.retries,
            )
        })
        .collect::<Result<_, _>>()?;
    let mut out = IntentOutput::default();
    for (n, r) in leaves.into_iter().zip(results) {
        match r {
            Some(items) => out.intents.extend(items),
            None => out.skipped.push(n.topic_id.clone()),
        }
    }
    Ok(out)
}

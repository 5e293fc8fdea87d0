use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{PipelineConfig, PipelineError, Stage, ARTIFACTS_DIR};
use crate::audit::{emit_audit, run_audit, AuditConfig};
use crate::bottom_up::{run_bottom_up, BottomUpConfig, HierarchicalQuerySet, Query, QueryLevel};
use crate::corpus::{chunk_document, clean_passages, load_corpus, CleaningRules, Document, PassageChunk};
use crate::dataset::{build_bundles, corpus_records, emit_dataset, render_stats};
use crate::eval::{evaluate_dataset, render_metrics};
use crate::gateway::Backends;
use crate::io::{read_json, read_jsonl, write_atomic, write_json, write_jsonl};
use crate::relevance::{
    assemble_qrels, direct_map, mine_level, passage_spaces, sentence_spaces, topic_spaces, RelevanceLabel, ScoredPair,
};
use crate::top_down::{build_topic_model, generate_topic_intents, IntentRecord, TopDownConfig, TopicModel};

pub(super) struct Ctx<'a> {
    pub cfg: &'a PipelineConfig,
    pub art: PathBuf,
    pub backends: Backends,
    pub seed: u64,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.art.join(name)
    }

    /// Workdir-relative key recorded in the manifest.
    fn rel(&self, name: &str) -> String {
        format!("{ARTIFACTS_DIR}/{name}")
    }

    fn top_down(&self) -> TopDownConfig {
        TopDownConfig {
            min_cluster_size: self.cfg.cluster.min_cluster_size,
            temporal_weight: self.cfg.temporal.weight,
            reference_date: self.cfg.temporal.reference_date,
            top_k_keywords: self.cfg.cluster.top_k_keywords,
            representatives: self.cfg.cluster.representatives,
            lang: self.cfg.llm.lang,
            temperature: self.cfg.llm.temperature,
            retries: self.cfg.llm.retries,
            on_classifier_failure: self.cfg.cluster.on_classifier_failure,
        }
    }
}

const DOCUMENTS: &str = "documents.jsonl";
const INGEST_WARNINGS: &str = "ingest_warnings.jsonl";
const PASSAGES: &str = "passages.jsonl";
const KEPT: &str = "kept_passages.jsonl";
const DROPPED: &str = "dropped_passages.jsonl";
const CLEANING_REPORT: &str = "cleaning_report.json";
const QUERY_SETS: &str = "query_sets.jsonl";
const BOTTOMUP_QUERIES: &str = "queries_bottomup.jsonl";
const BOTTOMUP_SUMMARY: &str = "bottomup_summary.json";
const TOPIC_MODEL: &str = "topic_model.json";
const INTENTS: &str = "intents.jsonl";
const INTENT_SUMMARY: &str = "intents_summary.json";
const DIRECT_LABELS: &str = "labels_direct.jsonl";
const MINED_LABELS: &str = "labels_mined.jsonl";
const AUDIT_LOG: &str = "audit_log.jsonl";
const MINING_SUMMARY: &str = "mining_summary.json";
pub(crate) const DATASET_DIR: &str = "dataset";
const AUDIT_DIR: &str = "audit";
const METRICS: &str = "eval/metrics.tsv";

#[derive(Serialize, Deserialize)]
struct BottomUpSummary {
    empty_count: usize,
    completed_count: usize,
    flagged: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct IntentSummary {
    skipped: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct LevelSummary {
    level: QueryLevel,
    spaces: usize,
    scored_pairs: usize,
    mined: usize,
    audit_pairs: usize,
    truncated_spaces: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct MiningSummary {
    direct: usize,
    levels: Vec<LevelSummary>,
    docs_without_subtree: Vec<String>,
}

/// The config values a stage reads. Backend URLs are included so that
/// pointing a stage at a different model invalidates its checkpoint.
pub(super) fn config_subset(cfg: &PipelineConfig, stage: Stage) -> Value {
    let b = &cfg.backends;
    let body = match stage {
        Stage::Ingest => json!({}),
        Stage::Chunk => json!({ "chunk": cfg.chunk }),
        Stage::Clean => json!({ "clean": cfg.clean, "quality": b.quality, "llm_retries": cfg.llm.retries }),
        Stage::GenBottomUp => json!({ "llm": cfg.llm, "chat": b.chat, "model": b.chat_model }),
        Stage::Cluster => json!({
            "cluster": cfg.cluster,
            "temporal": cfg.temporal,
            "classify": b.classify,
            "embed": b.embed,
            "embed_dim": b.embed_dim,
        }),
        Stage::GenTopDown => json!({ "cluster": cfg.cluster, "llm": cfg.llm, "chat": b.chat, "model": b.chat_model }),
        Stage::Mine => json!({ "mining": cfg.mining, "rerank": b.rerank }),
        Stage::Emit => json!({}),
        Stage::Audit => json!({
            "audit": cfg.audit,
            "threshold": cfg.mining.threshold,
            "llm_retries": cfg.llm.retries,
            "chat": b.chat,
            "model": b.chat_model,
        }),
        Stage::Eval => json!({ "eval": cfg.eval, "embed": b.embed, "embed_dim": b.embed_dim }),
    };
    json!({ "stage": stage.name(), "seed": stage.seed(cfg.seed), "config": body })
}

/// Runs one stage body and returns the workdir-relative paths it wrote.
pub(super) fn run(stage: Stage, ctx: &Ctx) -> Result<Vec<String>, PipelineError> {
    match stage {
        Stage::Ingest => ingest(ctx),
        Stage::Chunk => chunk(ctx),
        Stage::Clean => clean(ctx),
        Stage::GenBottomUp => gen_bottom_up(ctx),
        Stage::Cluster => cluster(ctx),
        Stage::GenTopDown => gen_top_down(ctx),
        Stage::Mine => mine(ctx),
        Stage::Emit => emit(ctx),
        Stage::Audit => audit(ctx),
        Stage::Eval => eval(ctx),
    }
}

fn ingest(ctx: &Ctx) -> Result<Vec<String>, PipelineError> {
    let loaded = load_corpus(&ctx.cfg.input.corpus)?;
    log::info!("ingest: {} documents, {} warnings", loaded.documents.len(), loaded.warnings.len());
    write_jsonl(&ctx.path(DOCUMENTS), &loaded.documents)?;
    write_jsonl(&ctx.path(INGEST_WARNINGS), &loaded.warnings)?;
    Ok(vec![ctx.rel(DOCUMENTS), ctx.rel(INGEST_WARNINGS)])
}

fn chunk(ctx: &Ctx) -> Result<Vec<String>, PipelineError> {
    let docs: Vec<Document> = read_jsonl(&ctx.path(DOCUMENTS))?;
    let c = &ctx.cfg.chunk;
    let passages: Vec<PassageChunk> = docs
        .par_iter()
        .flat_map_iter(|d| chunk_document(d, c.passage_len, c.sentence_len))
        .collect();
    write_jsonl(&ctx.path(PASSAGES), &passages)?;
    Ok(vec![ctx.rel(PASSAGES)])
}

fn clean(ctx: &Ctx) -> Result<Vec<String>, PipelineError> {
    let passages: Vec<PassageChunk> = read_jsonl(&ctx.path(PASSAGES))?;
    let mut rules = CleaningRules::default();
    if let Some(k) = &ctx.cfg.clean.disclaimer_keywords {
        rules.disclaimer_keywords = k.iter().map(|s| s.to_lowercase()).collect();
    }
    let out = clean_passages(
        passages,
        &rules,
        &ctx.backends,
        ctx.cfg.clean.drop_threshold,
        ctx.cfg.clean.on_scorer_failure,
    )?;
    log::info!("clean: dropped {} of {}", out.report.dropped, out.report.total);
    write_jsonl(&ctx.path(KEPT), &out.kept)?;
    write_jsonl(&ctx.path(DROPPED), &out.dropped)?;
    write_json(&ctx.path(CLEANING_REPORT), &out.report)?;
    Ok(vec![ctx.rel(KEPT), ctx.rel(DROPPED), ctx.rel(CLEANING_REPORT)])
}

fn gen_bottom_up(ctx: &Ctx) -> Result<Vec<String>, PipelineError> {
    let docs: Vec<Document> = read_jsonl(&ctx.path(DOCUMENTS))?;
    let kept: Vec<PassageChunk> = read_jsonl(&ctx.path(KEPT))?;
    let cfg = BottomUpConfig {
        lang: ctx.cfg.llm.lang,
        temperature: ctx.cfg.llm.temperature,
        retries: ctx.cfg.llm.retries,
        ..BottomUpConfig::default()
    };
    let out = run_bottom_up(&docs, &kept, &ctx.backends, &cfg)?;
    let summary = BottomUpSummary {
        empty_count: out.empty_count,
        completed_count: out.completed_count,
        flagged: out.flagged().map(String::from).collect(),
    };
    log::info!("gen-bottomup: {} queries", out.queries.len());
    write_jsonl::<HierarchicalQuerySet>(&ctx.path(QUERY_SETS), &out.sets)?;
    write_jsonl(&ctx.path(BOTTOMUP_QUERIES), &out.queries)?;
    write_json(&ctx.path(BOTTOMUP_SUMMARY), &summary)?;
    Ok(vec![ctx.rel(QUERY_SETS), ctx.rel(BOTTOMUP_QUERIES), ctx.rel(BOTTOMUP_SUMMARY)])
}

fn cluster(ctx: &Ctx) -> Result<Vec<String>, PipelineError> {
    let docs: Vec<Document> = read_jsonl(&ctx.path(DOCUMENTS))?;
    let model = build_topic_model(&docs, &ctx.backends, &ctx.top_down())?;
    log::info!("cluster: {} topics, {} leaves", model.tree.nodes.len(), model.tree.leaves().count());
    write_json(&ctx.path(TOPIC_MODEL), &model)?;
    Ok(vec![ctx.rel(TOPIC_MODEL)])
}

fn gen_top_down(ctx: &Ctx) -> Result<Vec<String>, PipelineError> {
    let model: TopicModel = read_json(&ctx.path(TOPIC_MODEL))?;
    let out = generate_topic_intents(&model.tree, &ctx.backends, &ctx.top_down())?;
    log::info!("gen-topdown: {} intents, {} topics skipped", out.intents.len(), out.skipped.len());
    write_jsonl(&ctx.path(INTENTS), &out.intents)?;
    write_json(&ctx.path(INTENT_SUMMARY), &IntentSummary { skipped: out.skipped })?;
    Ok(vec![ctx.rel(INTENTS), ctx.rel(INTENT_SUMMARY)])
}

fn intent_queries(intents: &[IntentRecord]) -> Vec<Query> {
    crate::top_down::IntentOutput {
        intents: intents.to_vec(),
        skipped: vec![],
    }
    .queries()
}

fn mine(ctx: &Ctx) -> Result<Vec<String>, PipelineError> {
    let queries: Vec<Query> = read_jsonl(&ctx.path(BOTTOMUP_QUERIES))?;
    let model: TopicModel = read_json(&ctx.path(TOPIC_MODEL))?;
    let intents: Vec<IntentRecord> = read_jsonl(&ctx.path(INTENTS))?;
    let direct = direct_map(&queries);
    let (passage, unassigned) = passage_spaces(&queries, &model.assignments);
    let levels = [
        (QueryLevel::Sentence, sentence_spaces(&queries)),
        (QueryLevel::Passage, passage),
        (QueryLevel::Topic, topic_spaces(&queries, &model.tree, &intents, &model.assignments)),
    ];
    let mut mined: Vec<RelevanceLabel> = Vec::new();
    let mut log: Vec<ScoredPair> = Vec::new();
    let mut summary = MiningSummary {
        direct: direct.len(),
        levels: vec![],
        docs_without_subtree: unassigned,
    };
    for (level, spaces) in levels {
        let out = mine_level(level, &spaces, &ctx.cfg.mining, &ctx.backends)?;
        log::info!("mine {}: {} pairs scored, {} labels", level.as_str(), out.scored_pairs, out.labels.len());
        summary.levels.push(LevelSummary {
            level,
            spaces: spaces.len(),
            scored_pairs: out.scored_pairs,
            mined: out.labels.len(),
            audit_pairs: out.audit.len(),
            truncated_spaces: out.truncated_spaces,
        });
        mined.extend(out.labels);
        log.extend(out.audit);
    }
    write_jsonl(&ctx.path(DIRECT_LABELS), &direct)?;
    write_jsonl(&ctx.path(MINED_LABELS), &mined)?;
    write_jsonl(&ctx.path(AUDIT_LOG), &log)?;
    write_json(&ctx.path(MINING_SUMMARY), &summary)?;
    Ok(vec![
        ctx.rel(DIRECT_LABELS),
        ctx.rel(MINED_LABELS),
        ctx.rel(AUDIT_LOG),
        ctx.rel(MINING_SUMMARY),
    ])
}

fn emit(ctx: &Ctx) -> Result<Vec<String>, PipelineError> {
    let docs: Vec<Document> = read_jsonl(&ctx.path(DOCUMENTS))?;
    let kept: Vec<PassageChunk> = read_jsonl(&ctx.path(KEPT))?;
    let mut queries: Vec<Query> = read_jsonl(&ctx.path(BOTTOMUP_QUERIES))?;
    let intents: Vec<IntentRecord> = read_jsonl(&ctx.path(INTENTS))?;
    queries.extend(intent_queries(&intents));
    let direct: Vec<RelevanceLabel> = read_jsonl(&ctx.path(DIRECT_LABELS))?;
    let mined: Vec<RelevanceLabel> = read_jsonl(&ctx.path(MINED_LABELS))?;
    let sets = assemble_qrels(&direct, &mined);
    let bundles = build_bundles(&queries, &sets);
    let dir = ctx.path(DATASET_DIR);
    let rows = emit_dataset(&dir, &corpus_records(&kept, &docs), &bundles)?;
    log::info!("emit:\n{}", render_stats(&rows));
    let mut written = vec![format!("{DATASET_DIR}/corpus.jsonl"), format!("{DATASET_DIR}/stats.tsv")];
    for b in &bundles {
        written.push(format!("{DATASET_DIR}/{}/queries.jsonl", b.name));
        written.push(format!("{DATASET_DIR}/{}/qrels.tsv", b.name));
    }
    Ok(written.iter().map(|w| ctx.rel(w)).collect())
}

fn audit(ctx: &Ctx) -> Result<Vec<String>, PipelineError> {
    let log: Vec<ScoredPair> = read_jsonl(&ctx.path(AUDIT_LOG))?;
    let cfg = AuditConfig {
        per_bin: ctx.cfg.audit.per_bin,
        threshold: ctx.cfg.mining.threshold,
        retries: ctx.cfg.llm.retries,
        seed: ctx.seed,
    };
    let outcome = run_audit(&log, &ctx.backends, &cfg)?;
    emit_audit(&ctx.path(AUDIT_DIR), &outcome)?;
    Ok(["audit_histogram.tsv", "audit_report.tsv", "judge_transcripts.jsonl"]
        .iter()
        .map(|f| ctx.rel(&format!("{AUDIT_DIR}/{f}")))
        .collect())
}

fn eval(ctx: &Ctx) -> Result<Vec<String>, PipelineError> {
    let rows = evaluate_dataset(&ctx.path(DATASET_DIR), &ctx.cfg.eval.model, &ctx.backends, ctx.cfg.eval.k)?;
    write_atomic(&ctx.path(METRICS), render_metrics(&rows).as_bytes())?;
    Ok(vec![ctx.rel(METRICS)])
}

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bottom_up::PromptLanguage;
use crate::gateway::{BackendSettings, FailurePolicy, DEFAULT_TEMPERATURE};
use crate::relevance::MiningConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    /// Corpus JSONL; relative paths resolve against the config file.
    pub corpus: PathBuf,
}

impl Default for InputSection {
    fn default() -> Self {
        Self { corpus: PathBuf::from("corpus.jsonl") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkSection {
    pub passage_len: usize,
    pub sentence_len: usize,
}

impl Default for ChunkSection {
    fn default() -> Self {
        Self { passage_len: 500, sentence_len: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanSection {
    pub drop_threshold: f64,
    pub on_scorer_failure: FailurePolicy,
    /// Replaces the built-in disclaimer keyword list when set.
    pub disclaimer_keywords: Option<Vec<String>>,
}

impl Default for CleanSection {
    fn default() -> Self {
        Self {
            drop_threshold: 0.5,
            on_scorer_failure: FailurePolicy::Fallback,
            disclaimer_keywords: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub min_cluster_size: usize,
    pub top_k_keywords: usize,
    pub representatives: usize,
    pub on_classifier_failure: FailurePolicy,
}

impl Default for ClusterSection {
    fn default() -> Self {
        Self {
            min_cluster_size: 5,
            top_k_keywords: 10,
            representatives: 5,
            on_classifier_failure: FailurePolicy::Fallback,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemporalSection {
    pub weight: f64,
    pub reference_date: Option<NaiveDate>,
}

impl Default for TemporalSection {
    fn default() -> Self {
        Self { weight: 0.1, reference_date: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub retries: u32,
    pub temperature: f64,
    pub lang: PromptLanguage,
}

impl Default for LlmSection {
    fn default() -> Self {
        Self {
            retries: 3,
            temperature: DEFAULT_TEMPERATURE,
            lang: PromptLanguage::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub per_bin: usize,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self { per_bin: crate::audit::DEFAULT_PER_BIN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: usize,
    /// Label written to metrics.tsv.
    pub model: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { k: 10, model: "embedder".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Endpoint {
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendsSection {
    pub chat: Endpoint,
    pub classify: Endpoint,
    pub embed: Endpoint,
    pub rerank: Endpoint,
    pub quality: Endpoint,
    pub api_key: Option<String>,
    pub chat_model: String,
    pub embed_dim: usize,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for BackendsSection {
    fn default() -> Self {
        let s = BackendSettings::default();
        Self {
            chat: Endpoint::default(),
            classify: Endpoint::default(),
            embed: Endpoint::default(),
            rerank: Endpoint::default(),
            quality: Endpoint::default(),
            api_key: None,
            chat_model: s.chat_model,
            embed_dim: s.embed_dim,
            max_in_flight: s.max_in_flight,
            timeout_secs: s.timeout_secs,
        }
    }
}

impl BackendsSection {
    pub fn settings(&self) -> BackendSettings {
        BackendSettings {
            chat_url: self.chat.url.clone(),
            classify_url: self.classify.url.clone(),
            embed_url: self.embed.url.clone(),
            rerank_url: self.rerank.url.clone(),
            quality_url: self.quality.url.clone(),
            api_key: self.api_key.clone(),
            chat_model: self.chat_model.clone(),
            embed_dim: self.embed_dim,
            max_in_flight: self.max_in_flight,
            timeout_secs: self.timeout_secs,
        }
    }

    /// Overrides URLs and the API key from `BACKEND_*` variables.
    pub fn apply_vars(&mut self, get: impl Fn(&str) -> Option<String>) {
        let mut s = self.settings();
        s.apply_vars(get);
        self.chat.url = s.chat_url;
        self.classify.url = s.classify_url;
        self.embed.url = s.embed_url;
        self.rerank.url = s.rerank_url;
        self.quality.url = s.quality_url;
        self.api_key = s.api_key;
    }

    pub fn apply_env(&mut self) {
        self.apply_vars(|k| std::env::var(k).ok());
    }
}

/// Whole-run configuration, loaded from TOML. Every section and key is
/// optional; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub input: InputSection,
    pub chunk: ChunkSection,
    pub clean: CleanSection,
    pub cluster: ClusterSection,
    pub temporal: TemporalSection,
    pub llm: LlmSection,
    pub mining: MiningConfig,
    pub audit: AuditSection,
    pub eval: EvalSection,
    pub backends: BackendsSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            input: InputSection::default(),
            chunk: ChunkSection::default(),
            clean: CleanSection::default(),
            cluster: ClusterSection::default(),
            temporal: TemporalSection::default(),
            llm: LlmSection::default(),
            mining: MiningConfig::default(),
            audit: AuditSection::default(),
            eval: EvalSection::default(),
            backends: BackendsSection::default(),
        }
    }
}

impl PipelineConfig {
    /// Every bound violation, in declaration order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                v.push(msg.to_string());
            }
        };
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        check(self.chunk.passage_len >= 1, "chunk.passage_len must be >= 1");
        check(self.chunk.sentence_len >= 1, "chunk.sentence_len must be >= 1");
        check(
            self.chunk.sentence_len <= self.chunk.passage_len,
            "chunk.sentence_len must not exceed chunk.passage_len",
        );
        check(unit(self.clean.drop_threshold), "clean.drop_threshold must be in [0, 1]");
        check(self.cluster.min_cluster_size >= 2, "cluster.min_cluster_size must be >= 2");
        check(self.cluster.top_k_keywords >= 1, "cluster.top_k_keywords must be >= 1");
        check(self.cluster.representatives >= 1, "cluster.representatives must be >= 1");
        check(
            self.temporal.weight.is_finite() && self.temporal.weight >= 0.0,
            "temporal.weight must be a finite number >= 0",
        );
        check(self.llm.retries <= 20, "llm.retries must be <= 20");
        check(
            (0.0..=2.0).contains(&self.llm.temperature),
            "llm.temperature must be in [0, 2]",
        );
        check(self.audit.per_bin >= 1, "audit.per_bin must be >= 1");
        check(self.eval.k >= 1, "eval.k must be >= 1");
        check(self.backends.embed_dim >= 1, "backends.embed_dim must be >= 1");
        check(self.backends.max_in_flight >= 1, "backends.max_in_flight must be >= 1");
        check(self.backends.timeout_secs >= 1, "backends.timeout_secs must be >= 1");
        v.extend(self.mining.violations());
        v
    }
}

/// Parses and validates TOML text. All bound violations are reported at once.
pub fn parse_config(text: &str) -> Result<PipelineConfig, ConfigError> {
    let cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let v = cfg.violations();
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(v))
    }
}

/// Loads a config file; a relative `input.corpus` is resolved against the
/// file's directory.
pub fn validate_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if cfg.input.corpus.is_relative() {
        if let Some(dir) = path.parent() {
            cfg.input.corpus = dir.join(&cfg.input.corpus);
        }
    }
    Ok(cfg)
}

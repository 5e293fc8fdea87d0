//! Client contracts for the model capabilities the pipeline consumes: a chat
//! LLM, an industry classifier, an embedder, a reranker and a passage
//! quality scorer. Each has a JSON-over-HTTP client and a deterministic mock.

pub mod http;
pub mod mock;
mod retry;
mod types;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use retry::{with_retry, Backoff, ConcurrencyLimit, Permit};
pub use types::*;

use http::{HttpChat, HttpClassifier, HttpEmbedder, HttpEndpoint, HttpQualityScorer, HttpReranker};
use mock::{DiceReranker, HashedBigramEmbedder, KeywordClassifier, MockChat, PassThroughScorer};

pub trait ChatBackend: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

pub trait IndustryClassifier: Send + Sync {
    fn classify(&self, text: &str) -> Result<IndustryLabel, BackendError>;
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbedVector, BackendError>;
}

pub trait Reranker: Send + Sync {
    fn rerank(&self, a: &str, b: &str) -> Result<RerankScore, BackendError>;
}

/// Passage quality in `[0, 1]`; higher is cleaner.
pub trait QualityScorer: Send + Sync {
    fn score(&self, text: &str) -> Result<f64, BackendError>;
}

/// What a stage does when a backend keeps failing after its retry budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Abort the stage.
    Fail,
    /// Degrade: rule-only cleaning, `none` industry label.
    #[default]
    Fallback,
}

/// Sends a chat request, retrying retryable failures up to `req.retries`
/// extra times with exponential backoff.
pub fn chat(
    backend: &dyn ChatBackend,
    req: &ChatRequest,
    backoff: &Backoff,
) -> Result<ChatResponse, BackendError> {
    if req.messages.is_empty() {
        return Err(BackendError::InvalidRequest("request has no messages".into()));
    }
    with_retry(req.retries, backoff, |_| backend.chat(req))
}

/// Bounds in-flight calls to the wrapped backend.
pub struct Limited<B> {
    inner: B,
    limit: Arc<ConcurrencyLimit>,
}

impl<B> Limited<B> {
    pub fn new(inner: B, max_in_flight: usize) -> Self {
        Self {
            inner,
            limit: Arc::new(ConcurrencyLimit::new(max_in_flight)),
        }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: ChatBackend> ChatBackend for Limited<B> {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let _permit = self.limit.acquire();
        self.inner.chat(req)
    }
}

impl<B: IndustryClassifier> IndustryClassifier for Limited<B> {
    fn classify(&self, text: &str) -> Result<IndustryLabel, BackendError> {
        let _permit = self.limit.acquire();
        self.inner.classify(text)
    }
}

impl<B: Embedder> Embedder for Limited<B> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed(&self, text: &str) -> Result<EmbedVector, BackendError> {
        let _permit = self.limit.acquire();
        self.inner.embed(text)
    }
}

impl<B: Reranker> Reranker for Limited<B> {
    fn rerank(&self, a: &str, b: &str) -> Result<RerankScore, BackendError> {
        let _permit = self.limit.acquire();
        self.inner.rerank(a, b)
    }
}

impl<B: QualityScorer> QualityScorer for Limited<B> {
    fn score(&self, text: &str) -> Result<f64, BackendError> {
        let _permit = self.limit.acquire();
        self.inner.score(text)
    }
}

/// Endpoint settings for all backends. A missing URL or the literal
/// `mock` selects the in-process mock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub chat_url: Option<String>,
    pub classify_url: Option<String>,
    pub embed_url: Option<String>,
    pub rerank_url: Option<String>,
    pub quality_url: Option<String>,
    pub api_key: Option<String>,
    pub chat_model: String,
    pub embed_dim: usize,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for BackendSettings {
    fn default() -> Self {
        Self {
            chat_url: None,
            classify_url: None,
            embed_url: None,
            rerank_url: None,
            quality_url: None,
            api_key: None,
            chat_model: "default".into(),
            embed_dim: HashedBigramEmbedder::DEFAULT_DIM,
            max_in_flight: 8,
            timeout_secs: 120,
        }
    }
}

impl BackendSettings {
    /// Applies `BACKEND_CHAT_URL`, `BACKEND_CLASSIFY_URL`, `BACKEND_EMBED_URL`,
    /// `BACKEND_RERANK_URL`, `BACKEND_QUALITY_URL` and `BACKEND_API_KEY`.
    pub fn apply_env(&mut self) {
        self.apply_vars(|k| std::env::var(k).ok());
    }

    pub fn apply_vars(&mut self, get: impl Fn(&str) -> Option<String>) {
        let slots: [(&str, &mut Option<String>); 6] = [
            ("BACKEND_CHAT_URL", &mut self.chat_url),
            ("BACKEND_CLASSIFY_URL", &mut self.classify_url),
            ("BACKEND_EMBED_URL", &mut self.embed_url),
            ("BACKEND_RERANK_URL", &mut self.rerank_url),
            ("BACKEND_QUALITY_URL", &mut self.quality_url),
            ("BACKEND_API_KEY", &mut self.api_key),
        ];
        for (var, slot) in slots {
            if let Some(v) = get(var).filter(|v| !v.is_empty()) {
                *slot = Some(v);
            }
        }
    }

    /// True when no real endpoint is configured.
    pub fn all_mock(&self) -> bool {
        [
            &self.chat_url,
            &self.classify_url,
            &self.embed_url,
            &self.rerank_url,
            &self.quality_url,
        ]
        .iter()
        .all(|u| real_url(u).is_none())
    }
}

fn real_url(u: &Option<String>) -> Option<&str> {
    u.as_deref().filter(|u| *u != "mock" && !u.is_empty())
}

/// The set of backends a pipeline run talks to.
#[derive(Clone)]
pub struct Backends {
    pub chat: Arc<dyn ChatBackend>,
    pub classifier: Arc<dyn IndustryClassifier>,
    pub embedder: Arc<dyn Embedder>,
    pub reranker: Arc<dyn Reranker>,
    pub quality: Arc<dyn QualityScorer>,
    pub taxonomy: Taxonomy,
    pub backoff: Backoff,
    pub retries: u32,
}

impl Backends {
    /// All-mock backends.
    pub fn mock(seed: u64) -> Self {
        Self {
            chat: Arc::new(MockChat::new(seed)),
            classifier: Arc::new(KeywordClassifier::default()),
            embedder: Arc::new(HashedBigramEmbedder::new(HashedBigramEmbedder::DEFAULT_DIM, seed)),
            reranker: Arc::new(DiceReranker),
            quality: Arc::new(PassThroughScorer),
            taxonomy: Taxonomy::default(),
            backoff: Backoff::none(),
            retries: 3,
        }
    }

    pub fn from_settings(settings: &BackendSettings, seed: u64, retries: u32) -> Self {
        let timeout = Duration::from_secs(settings.timeout_secs);
        let endpoint = |u: &str| HttpEndpoint::new(u, settings.api_key.clone(), timeout);
        let bound = settings.max_in_flight;
        let mut b = Self::mock(seed);
        b.retries = retries;
        if let Some(u) = real_url(&settings.chat_url) {
            b.chat = Arc::new(Limited::new(
                HttpChat::new(endpoint(u), settings.chat_model.clone()),
                bound,
            ));
        }
        if let Some(u) = real_url(&settings.classify_url) {
            b.classifier = Arc::new(Limited::new(HttpClassifier::new(endpoint(u)), bound));
        }
        if let Some(u) = real_url(&settings.embed_url) {
            b.embedder = Arc::new(Limited::new(
                HttpEmbedder::new(endpoint(u), settings.embed_dim),
                bound,
            ));
        } else {
            b.embedder = Arc::new(HashedBigramEmbedder::new(settings.embed_dim, seed));
        }
        if let Some(u) = real_url(&settings.rerank_url) {
            b.reranker = Arc::new(Limited::new(HttpReranker::new(endpoint(u)), bound));
        }
        if let Some(u) = real_url(&settings.quality_url) {
            b.quality = Arc::new(Limited::new(HttpQualityScorer::new(endpoint(u)), bound));
        }
        if !settings.all_mock() {
            b.backoff = Backoff::default();
        }
        b
    }

    pub fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        chat(self.chat.as_ref(), req, &self.backoff)
    }

    /// Classifies `text` onto the taxonomy. Under [`FailurePolicy::Fallback`]
    /// a persistent backend failure yields `none`.
    pub fn classify_industry(
        &self,
        text: &str,
        policy: FailurePolicy,
    ) -> Result<IndustryLabel, BackendError> {
        match with_retry(self.retries, &self.backoff, |_| self.classifier.classify(text)) {
            Ok(label) => Ok(self.taxonomy.resolve(label.as_str())),
            Err(e) if policy == FailurePolicy::Fallback => {
                log::warn!("industry classification failed ({e}); labelling none");
                Ok(IndustryLabel::none())
            }
            Err(e) => Err(e),
        }
    }

    pub fn embed(&self, text: &str) -> Result<EmbedVector, BackendError> {
        with_retry(self.retries, &self.backoff, |_| self.embedder.embed(text))
    }

    pub fn rerank(&self, a: &str, b: &str) -> Result<RerankScore, BackendError> {
        with_retry(self.retries, &self.backoff, |_| self.reranker.rerank(a, b))
    }

    pub fn quality(&self, text: &str) -> Result<f64, BackendError> {
        with_retry(self.retries, &self.backoff, |_| self.quality.score(text))
    }
}

/// Scoring through `Backends` picks up its retry policy.
impl QualityScorer for Backends {
    fn score(&self, text: &str) -> Result<f64, BackendError> {
        self.quality(text)
    }
}

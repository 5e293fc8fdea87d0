//! JSON-over-HTTP clients.
//!
//! Wire formats (all `POST`, `Content-Type: application/json`, optional
//! `Authorization: Bearer <key>`):
//!
//! | capability | request body | response body |
//! |---|---|---|
//! | chat | `{"model", "messages": [{"role","content"}], "temperature", "max_tokens"}` | `{"choices": [{"message": {"content"}, "finish_reason"}], "usage": {"prompt_tokens","completion_tokens"}}` |
//! | classify | `{"text"}` | `{"label"}` |
//! | embed | `{"text"}` | `{"embedding": [f64]}` |
//! | rerank | `{"text_a", "text_b"}` | `{"score"}` |
//! | quality | `{"text"}` | `{"score"}` |

use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::types::*;
use super::{ChatBackend, Embedder, IndustryClassifier, QualityScorer, Reranker};

#[derive(Debug, Clone)]
pub struct HttpEndpoint {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl HttpEndpoint {
    pub fn new(url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("http client construction");
        Self {
            client,
            url: url.into(),
            api_key,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn post(&self, body: &Value) -> Result<Value, BackendError> {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| BackendError::Transport(format!("{}: {e}", self.url)))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| BackendError::Transport(format!("reading body: {e}")))?;
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))
    }
}

fn field<T: for<'de> Deserialize<'de>>(v: &Value, pointer: &str) -> Result<T, BackendError> {
    let raw = v
        .pointer(pointer)
        .ok_or_else(|| BackendError::Malformed(format!("missing {pointer}")))?;
    T::deserialize(raw).map_err(|e| BackendError::Malformed(format!("{pointer}: {e}")))
}

#[derive(Debug, Clone)]
pub struct HttpChat {
    endpoint: HttpEndpoint,
    model: String,
}

impl HttpChat {
    pub fn new(endpoint: HttpEndpoint, model: impl Into<String>) -> Self {
        Self {
            endpoint,
            model: model.into(),
        }
    }
}

impl ChatBackend for HttpChat {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        if req.messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages".into()));
        }
        let body = json!({
            "model": self.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let v = self.endpoint.post(&body)?;
        let text: String = field(&v, "/choices/0/message/content")?;
        let finish_reason: String =
            field(&v, "/choices/0/finish_reason").unwrap_or_else(|_| "unknown".into());
        let usage: TokenUsage = field(&v, "/usage").unwrap_or_default();
        Ok(ChatResponse {
            text,
            finish_reason,
            usage,
        })
    }
}

#[derive(Debug, Clone)]
pub struct HttpClassifier {
    endpoint: HttpEndpoint,
}

impl HttpClassifier {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        Self { endpoint }
    }
}

impl IndustryClassifier for HttpClassifier {
    fn classify(&self, text: &str) -> Result<IndustryLabel, BackendError> {
        let v = self.endpoint.post(&json!({ "text": text }))?;
        let label: String = field(&v, "/label")?;
        Ok(IndustryLabel::new(label))
    }
}

#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    endpoint: HttpEndpoint,
    dim: usize,
}

impl HttpEmbedder {
    pub fn new(endpoint: HttpEndpoint, dim: usize) -> Self {
        Self { endpoint, dim }
    }
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbedVector, BackendError> {
        if text.trim().is_empty() {
            return Ok(EmbedVector::normalized(vec![0.0; self.dim]));
        }
        let v = self.endpoint.post(&json!({ "text": text }))?;
        let raw: Vec<f64> = field(&v, "/embedding")?;
        if raw.len() != self.dim {
            return Err(BackendError::Malformed(format!(
                "embedding has dim {}, expected {}",
                raw.len(),
                self.dim
            )));
        }
        Ok(EmbedVector::normalized(raw))
    }
}

#[derive(Debug, Clone)]
pub struct HttpReranker {
    endpoint: HttpEndpoint,
}

impl HttpReranker {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        Self { endpoint }
    }
}

impl Reranker for HttpReranker {
    fn rerank(&self, a: &str, b: &str) -> Result<RerankScore, BackendError> {
        let v = self.endpoint.post(&json!({ "text_a": a, "text_b": b }))?;
        let score: f64 = field(&v, "/score")?;
        Ok(RerankScore::clamped(score))
    }
}

#[derive(Debug, Clone)]
pub struct HttpQualityScorer {
    endpoint: HttpEndpoint,
}

impl HttpQualityScorer {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        Self { endpoint }
    }
}

impl QualityScorer for HttpQualityScorer {
    fn score(&self, text: &str) -> Result<f64, BackendError> {
        let v = self.endpoint.post(&json!({ "text": text }))?;
        let score: f64 = field(&v, "/score")?;
        Ok(score.clamp(0.0, 1.0))
    }
}

use serde_json::Value;
use thiserror::Error;

/// A structured reply that failed validation. Every variant is worth asking
/// the model again.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResponseError {
    #[error("response is not valid JSON: {0}")]
    Unparsable(String),
    #[error("response violates the output schema: {0}")]
    Schema(String),
    #[error("expected {expected} sentence queries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

impl ResponseError {
    pub fn is_retryable(&self) -> bool {
        true
    }
}

/// Removes a surrounding markdown code fence (```json ... ```), if any.
pub fn strip_code_fence(text: &str) -> &str {
    let t = text.trim();
    let Some(open) = t.find("```") else {
        return t;
    };
    let after = &t[open + 3..];
    // skip the info string on the fence line
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => body[..close].trim(),
        None => body.trim(),
    }
}

/// Parses the first top-level JSON value delimited by `open`/`close` in a
/// possibly fenced, possibly chatty reply.
pub fn extract_json(text: &str, open: char, close: char) -> Result<Value, ResponseError> {
    let body = strip_code_fence(text);
    let start = body
        .find(open)
        .ok_or_else(|| ResponseError::Unparsable(format!("no '{open}' in response")))?;
    let end = body
        .rfind(close)
        .filter(|e| *e > start)
        .ok_or_else(|| ResponseError::Unparsable(format!("no closing '{close}'")))?;
    serde_json::from_str(&body[start..=end]).map_err(|e| ResponseError::Unparsable(e.to_string()))
}

fn as_query_string(v: &Value, what: &str) -> Result<String, ResponseError> {
    match v {
        Value::String(s) => Ok(s.trim().to_string()),
        Value::Null => Ok(String::new()),
        other => Err(ResponseError::Schema(format!("{what} must be a string, got {other}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedQueries {
    pub passage_query: String,
    pub sentence_queries: Vec<String>,
}

/// Validates a hierarchical-query reply: an object with `passage_query`
/// (string) and `sentence_queries` (list of exactly `n_sentences` strings).
pub fn parse_generation_response(
    text: &str,
    n_sentences: usize,
) -> Result<GeneratedQueries, ResponseError> {
    let parsed = parse_lenient(text)?;
    if parsed.sentence_queries.len() != n_sentences {
        return Err(ResponseError::LengthMismatch {
            expected: n_sentences,
            got: parsed.sentence_queries.len(),
        });
    }
    Ok(parsed)
}

/// Same schema checks as [`parse_generation_response`] without the length
/// check; used for pad/truncate repair.
pub(crate) fn parse_lenient(text: &str) -> Result<GeneratedQueries, ResponseError> {
    let v = extract_json(text, '{', '}')?;
    let obj = v
        .as_object()
        .ok_or_else(|| ResponseError::Schema("top level must be an object".into()))?;
    let passage_query = as_query_string(
        obj.get("passage_query")
            .ok_or_else(|| ResponseError::Schema("missing key passage_query".into()))?,
        "passage_query",
    )?;
    let list = obj
        .get("sentence_queries")
        .ok_or_else(|| ResponseError::Schema("missing key sentence_queries".into()))?
        .as_array()
        .ok_or_else(|| ResponseError::Schema("sentence_queries must be a list".into()))?;
    let sentence_queries = list
        .iter()
        .map(|q| as_query_string(q, "sentence query"))
        .collect::<Result<_, _>>()?;
    Ok(GeneratedQueries {
        passage_query,
        sentence_queries,
    })
}

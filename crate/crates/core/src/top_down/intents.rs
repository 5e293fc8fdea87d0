use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bottom_up::{extract_json, PromptLanguage, ResponseError};
use crate::gateway::{BackendError, Backends, ChatRequest, Message};

const INTENT_EN: &str = r#"I have a topic described by the following keywords: [KEYWORDS]
For this topic, the following documents represent a small but representative subset of all relevant documents: [DOCUMENTS]
Please generate a formatted dictionary list representing query intents and sub-query sets related to this topic.

Output Format:
[{
    "intent": "{brief description of the core purpose for querying this topic}",
    "subqueries": [
        "{subquery 1: first question to address the intent}",
        "{subquery 2: second question to address the intent}",
        ...]
}]"#;

const INTENT_ZH: &str = r#"我有一个由以下关键词描述的主题：[KEYWORDS]
对于该主题，以下文档是全部相关文档中一个小而有代表性的子集：[DOCUMENTS]
请生成一个格式化的字典列表，表示与该主题相关的查询意图及子查询集合。

输出格式：
[{
    "intent": "{查询该主题的核心目的的简要描述}",
    "subqueries": [
        "{子查询1：实现该意图的第一个问题}",
        "{子查询2：实现该意图的第二个问题}",
        ...]
}]"#;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentRecord {
    pub topic_id: String,
    /// `{topic_id}-i{n}`; the query id of the intent.
    pub intent_id: String,
    pub intent: String,
    pub subqueries: Vec<String>,
}

pub fn intent_template(lang: PromptLanguage) -> &'static str {
    match lang {
        PromptLanguage::En => INTENT_EN,
        PromptLanguage::Zh => INTENT_ZH,
    }
}

/// Keywords and titles are rendered as JSON arrays, keywords first.
pub fn build_intent_prompt(keywords: &[String], titles: &[String], lang: PromptLanguage) -> ChatRequest {
    let kw = serde_json::to_string(keywords).expect("string list serializes");
    let docs = serde_json::to_string(titles).expect("string list serializes");
    let content = intent_template(lang)
        .replacen("[KEYWORDS]", &kw, 1)
        .replacen("[DOCUMENTS]", &docs, 1);
    ChatRequest::new(vec![Message::user(content)])
}

/// `(intent, subqueries)` pairs; empty subqueries are dropped, and an entry
/// left with none is a schema error.
pub fn parse_intent_response(text: &str) -> Result<Vec<(String, Vec<String>)>, ResponseError> {
    let v = extract_json(text, '[', ']')?;
    let list = v
        .as_array()
        .ok_or_else(|| ResponseError::Schema("top level must be a list".into()))?;
    if list.is_empty() {
        return Err(ResponseError::Schema("empty intent list".into()));
    }
    list.iter()
        .map(|item| {
            let intent = item
                .get("intent")
                .and_then(Value::as_str)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| ResponseError::Schema("missing or empty intent".into()))?;
            let subs = item
                .get("subqueries")
                .ok_or_else(|| ResponseError::Schema("missing key subqueries".into()))?
                .as_array()
                .ok_or_else(|| ResponseError::Schema("subqueries must be a list".into()))?;
            let subs: Vec<String> = subs
                .iter()
                .filter_map(Value::as_str)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            if subs.is_empty() {
                return Err(ResponseError::Schema("no non-empty subqueries".into()));
            }
            Ok((intent.to_string(), subs))
        })
        .collect()
}

/// Asks for the intents of one topic. `Ok(None)` means every attempt came
/// back malformed; the caller skips and flags the topic.
pub fn generate_intents(
    topic_id: &str,
    keywords: &[String],
    titles: &[String],
    backends: &Backends,
    lang: PromptLanguage,
    temperature: f64,
    retries: u32,
) -> Result<Option<Vec<IntentRecord>>, BackendError> {
    let mut req = build_intent_prompt(keywords, titles, lang).with_retries(backends.retries);
    req.temperature = temperature;
    for attempt in 0..=retries {
        let reply = backends.chat(&req)?;
        match parse_intent_response(&reply.text) {
            Ok(items) => {
                return Ok(Some(
                    items
                        .into_iter()
                        .enumerate()
                        .map(|(i, (intent, subqueries))| IntentRecord {
                            topic_id: topic_id.to_string(),
                            intent_id: format!("{topic_id}-i{i}"),
                            intent,
                            subqueries,
                        })
                        .collect(),
                ))
            }
            Err(e) => log::warn!("topic {topic_id} attempt {}: {e}", attempt + 1),
        }
    }
    log::warn!("topic {topic_id}: no usable intents, skipped");
    Ok(None)
}

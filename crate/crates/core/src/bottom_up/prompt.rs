use serde::{Deserialize, Serialize};

use crate::corpus::PassageChunk;
use crate::gateway::{ChatRequest, Message};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptLanguage {
    #[default]
    En,
    Zh,
}

const GENERATION_EN: &str = r#"Prompt: Given a passage from a financial report (provided as a list of sentences), generate hierarchical queries including both passage-level and sentence-level queries. Follow these requirements strictly and return results in JSON format.

Input: {SENTENCES}

Requirements:
1. Ignore disclaimers, copyright notices, or sensitive information
2. Include passage-specific information (company names, events, data)
3. Use empty string ("") for unclear sentences
4. Return in specified JSON format

Output Format: {"passage_query": "query 0", "sentence_queries": ["Query 1", "Query 2", ..., "Query N"]}"#;

const GENERATION_ZH: &str = r#"提示：给定一段金融研究报告中的文本（以句子列表形式提供），生成包含段落级查询和句子级查询的层次化查询。请严格遵循以下要求，并以JSON格式返回结果。

输入：{SENTENCES}

要求：
1. 忽略免责声明、版权声明或敏感信息
2. 包含该段落特有的信息（公司名称、事件、数据）
3. 对含义不明确的句子使用空字符串（""）
4. 按指定的JSON格式返回

输出格式：{"passage_query": "查询0", "sentence_queries": ["查询1", "查询2", ..., "查询N"]}"#;

pub fn generation_template(lang: PromptLanguage) -> &'static str {
    match lang {
        PromptLanguage::En => GENERATION_EN,
        PromptLanguage::Zh => GENERATION_ZH,
    }
}

/// One-message request asking for a passage query plus one query per
/// sentence. Sentences are embedded as a JSON array.
pub fn build_generation_prompt(passage: &PassageChunk, lang: PromptLanguage) -> ChatRequest {
    debug_assert!(!passage.sentences.is_empty(), "passage without sentences");
    let sentences: Vec<&str> = passage.sentences.iter().map(|s| s.text.as_str()).collect();
    let array = serde_json::to_string(&sentences).expect("string list serializes");
    let content = generation_template(lang).replacen("{SENTENCES}", &array, 1);
    ChatRequest::new(vec![Message::user(content)])
}

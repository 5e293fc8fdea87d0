use std::sync::LazyLock;

use regex::Regex;

use super::JudgeScore;
use crate::gateway::{BackendError, Backends, ChatRequest, Message};
use crate::relevance::ScoredPair;

pub const JUDGE_TEMPLATE: &str = "Please evaluate the synonymy between the following two sentences on a scale from 5 (completely synonymous) to 1 (not synonymous) and provide the score along with a brief explanation:
{PAIR}.

Scoring Criteria as follows:

Completely Synonymous (5 points): The core meaning of both sentences is identical, with only differences in expression.

Highly Synonymous (4 points): The core meaning is the same, but there are slight extensions, omissions, or differences in emphasis.

Partially Synonymous (3 points): The core meaning overlaps partially, but there are significant differences in focus or interpretation.

Low Synonymy (2 points): Only some keywords or parts of the content are similar, but the overall meaning is unrelated.

Not Synonymous (1 point): The core meanings of the two sentences are entirely different, with no semantic connection.";

/// The two texts go on one line as JSON strings: `"a" and "b".`
pub fn build_judge_prompt(a: &str, b: &str) -> ChatRequest {
    let q = |s: &str| serde_json::to_string(&s.replace('\n', " ")).expect("string serializes");
    let pair = format!("{} and {}", q(a), q(b));
    ChatRequest::new(vec![Message::user(JUDGE_TEMPLATE.replacen("{PAIR}", &pair, 1))])
}

static LABELLED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:score|rating|评分|得分|分数)\s*(?:is|为|是)?\s*[:：=]?\s*\**\s*([1-5])(?:[^0-9.]|\.[^0-9]|\.?$)")
        .expect("judge regex compiles")
});
static BARE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|[^0-9.])([1-5])(?:[^0-9.]|\.[^0-9]|\.?$)").expect("judge regex compiles"));

/// Rating 1..=5 and the rationale that follows it. A labelled score
/// ("Score: 3", "评分：4") wins over the first standalone digit.
pub fn parse_judge_response(text: &str) -> Option<(u8, String)> {
    let caps = LABELLED.captures(text).or_else(|| BARE.captures(text))?;
    let m = caps.get(1)?;
    let rating = m.as_str().parse().ok()?;
    let rest = text[m.end()..]
        .trim_start_matches(|c: char| c.is_whitespace() || ".。:：-—,，*)）".contains(c))
        .trim();
    let rationale = if rest.is_empty() { text.trim() } else { rest };
    Some((rating, rationale.to_string()))
}

/// Asks the judge up to `1 + retries` times until a rating can be read.
pub fn judge_pair(pair: &ScoredPair, backends: &Backends, retries: u32) -> Result<JudgeScore, BackendError> {
    let req = build_judge_prompt(&pair.text_a, &pair.text_b).with_retries(backends.retries);
    let mut transcript = Vec::new();
    for _ in 0..=retries {
        let reply = backends.chat(&req)?;
        let parsed = parse_judge_response(&reply.text);
        transcript.push(reply.text);
        if let Some((rating, rationale)) = parsed {
            return Ok(JudgeScore {
                pair: pair.clone(),
                rating: Some(rating),
                rationale,
                transcript,
            });
        }
    }
    log::warn!("no rating for {} / {}; unjudged", pair.query_a_id, pair.query_b_id);
    Ok(JudgeScore {
        pair: pair.clone(),
        rating: None,
        rationale: String::new(),
        transcript,
    })
}

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Failure talking to a model backend.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response body: {0}")]
    Malformed(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl BackendError {
    /// Transport failures, 429/5xx statuses and malformed bodies are worth
    /// another attempt. Other 4xx responses are not.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) | BackendError::Malformed(_) => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            BackendError::InvalidRequest(_) => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 0.2;
pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Extra attempts after the first one.
    pub retries: u32,
}

impl ChatRequest {
    pub fn new(messages: Vec<Message>) -> Self {
        Self {
            messages,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            retries: 3,
        }
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    /// Concatenated content of all user messages.
    pub fn user_text(&self) -> String {
        self.messages
            .iter()
            .filter(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: String,
    pub usage: TokenUsage,
}

/// One label from a closed industry taxonomy, or `none`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndustryLabel(String);

impl IndustryLabel {
    pub const NONE: &'static str = "none";

    pub fn new(label: impl Into<String>) -> Self {
        Self(label.into())
    }

    pub fn none() -> Self {
        Self(Self::NONE.to_string())
    }

    pub fn is_none(&self) -> bool {
        self.0 == Self::NONE
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for IndustryLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A unit-norm embedding. `degenerate` marks inputs that produced a zero
/// vector and were replaced by the first basis vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedVector {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

impl EmbedVector {
    /// L2-normalizes `raw`; a zero (or non-finite) vector becomes `e_0`.
    pub fn normalized(mut raw: Vec<f64>) -> Self {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            raw.iter_mut().for_each(|v| *v /= norm);
            Self {
                values: raw,
                degenerate: false,
            }
        } else {
            let mut values = vec![0.0; raw.len().max(1)];
            values[0] = 1.0;
            Self {
                values,
                degenerate: true,
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn dot(&self, other: &EmbedVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Relevance score in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RerankScore(f64);

impl RerankScore {
    /// Clamps into `[0, 1]`, logging out-of-range values. NaN maps to 0.
    pub fn clamped(raw: f64) -> Self {
        if raw.is_nan() {
            log::warn!("reranker returned NaN, scoring as 0");
            return Self(0.0);
        }
        if !(0.0..=1.0).contains(&raw) {
            log::warn!("reranker score {raw} outside [0,1], clamping");
        }
        Self(raw.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// The default 28-category industry taxonomy, with the Chinese keywords the
/// mock classifier matches on.
pub const DEFAULT_TAXONOMY: [(&str, &[&str]); 28] = [
    ("Agriculture", &["农业", "农林牧渔", "养殖", "种业", "饲料"]),
    ("Mining", &["采掘", "煤炭", "矿业", "石油", "天然气"]),
    ("Chemicals", &["化工", "化学", "化肥", "塑料"]),
    ("Steel", &["钢铁", "钢材", "铁矿"]),
    ("NonferrousMetals", &["有色金属", "铜", "铝", "锂", "黄金"]),
    ("Electronics", &["电子", "半导体", "芯片", "面板"]),
    ("HomeAppliances", &["家电", "家用电器", "空调", "冰箱"]),
    ("FoodBeverage", &["食品", "饮料", "白酒", "乳业", "啤酒"]),
    ("TextilesApparel", &["纺织", "服装", "服饰"]),
    ("LightManufacturing", &["轻工", "造纸", "家居", "包装"]),
    ("Pharmaceuticals", &["医药", "生物", "医疗", "创新药", "疫苗"]),
    ("Utilities", &["公用事业", "电力", "燃气", "水务"]),
    ("Transportation", &["交通运输", "物流", "航运", "航空", "快递"]),
    ("RealEstate", &["房地产", "地产", "物业"]),
    ("Retail", &["商贸", "零售", "商业贸易", "百货"]),
    ("ConsumerServices", &["休闲服务", "旅游", "酒店", "餐饮", "免税"]),
    ("Conglomerates", &["综合"]),
    ("BuildingMaterials", &["建材", "建筑材料", "水泥", "玻璃"]),
    ("Construction", &["建筑装饰", "建筑", "基建", "工程"]),
    ("ElectricalEquipment", &["电气设备", "电力设备", "光伏", "风电", "储能", "电池"]),
    ("Defense", &["国防", "军工", "航天"]),
    ("Computers", &["计算机", "软件", "云计算", "人工智能", "信创"]),
    ("Media", &["传媒", "游戏", "影视", "广告", "出版"]),
    ("Telecom", &["通信", "运营商", "光模块", "5G"]),
    ("Banking", &["银行", "信贷", "存款"]),
    ("NonBankFinance", &["非银", "证券", "保险", "券商", "信托"]),
    ("Automobiles", &["汽车", "整车", "新能源车", "零部件"]),
    ("Machinery", &["机械", "设备", "工程机械", "机器人"]),
];

/// Closed set of industry names a classifier may return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    labels: Vec<String>,
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self::new(DEFAULT_TAXONOMY.iter().map(|(name, _)| name.to_string()))
    }
}

impl Taxonomy {
    pub fn new(labels: impl IntoIterator<Item = String>) -> Self {
        Self {
            labels: labels.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Maps a raw backend label onto the taxonomy; anything unknown is `none`.
    pub fn resolve(&self, raw: &str) -> IndustryLabel {
        let raw = raw.trim();
        if self.labels.iter().any(|l| l == raw) {
            IndustryLabel::new(raw)
        } else {
            if !raw.is_empty() && raw != IndustryLabel::NONE {
                log::warn!("classifier label {raw:?} not in taxonomy, using none");
            }
            IndustryLabel::none()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_taxonomy_has_28_distinct_labels() {
        let t = Taxonomy::default();
        assert_eq!(t.len(), 28);
        let mut names: Vec<_> = DEFAULT_TAXONOMY.iter().map(|(n, _)| *n).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 28);
    }

    #[test]
    fn unknown_label_resolves_to_none() {
        let t = Taxonomy::default();
        assert_eq!(t.resolve("Steel"), IndustryLabel::new("Steel"));
        assert!(t.resolve("Crypto").is_none());
    }

    #[test]
    fn zero_vector_becomes_basis() {
        let v = EmbedVector::normalized(vec![0.0; 4]);
        assert!(v.degenerate);
        assert_eq!(v.values, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rerank_scores_are_clamped() {
        assert_eq!(RerankScore::clamped(1.3).value(), 1.0);
        assert_eq!(RerankScore::clamped(-0.2).value(), 0.0);
        assert_eq!(RerankScore::clamped(f64::NAN).value(), 0.0);
    }

    #[test]
    fn retryability() {
        assert!(BackendError::Transport("x".into()).is_retryable());
        assert!(BackendError::Status { status: 503, body: String::new() }.is_retryable());
        assert!(BackendError::Status { status: 429, body: String::new() }.is_retryable());
        assert!(!BackendError::Status { status: 400, body: String::new() }.is_retryable());
        assert!(BackendError::Malformed("x".into()).is_retryable());
    }
}

use serde::{Deserialize, Serialize};

pub const DEFAULT_TITLE_TOKENS: f64 = 20.0;

/// Inference-cost model in token units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub n: f64,
    pub t: f64,
    pub m: f64,
    pub l2: f64,
    /// Sentence-chunk count, n*t/100.
    pub nc1: f64,
    /// Passage-chunk count, n*t/500.
    pub nc2: f64,
    pub bert_cost: f64,
    pub llm_cost: f64,
    pub rerank_sentence: f64,
    pub rerank_passage: f64,
    pub rerank_topic: f64,
}

impl CostEstimate {
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("n", self.n),
            ("t", self.t),
            ("m", self.m),
            ("L2", self.l2),
            ("NC1", self.nc1),
            ("NC2", self.nc2),
            ("bert_cost", self.bert_cost),
            ("llm_cost", self.llm_cost),
            ("rerank_sentence", self.rerank_sentence),
            ("rerank_passage", self.rerank_passage),
            ("rerank_topic", self.rerank_topic),
        ]
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("quantity\tvalue\n");
        for (k, v) in self.rows() {
            s.push_str(&format!("{k}\t{v:.4}\n"));
        }
        s
    }
}

/// `n` documents of `t` tokens, `m` clusters (default sqrt(n)) and `l2`
/// tokens per title.
pub fn estimate_cost(n: f64, t: f64, m: Option<f64>, l2: Option<f64>) -> CostEstimate {
    let m = m.unwrap_or_else(|| n.sqrt());
    let l2 = l2.unwrap_or(DEFAULT_TITLE_TOKENS);
    let rerank_passage = if m > 0.0 { n * n * t * t / (m * 500.0 * 500.0) } else { 0.0 };
    let rerank_topic = if m > 0.0 { m * (n / m) * (t / 500.0) } else { 0.0 };
    CostEstimate {
        n,
        t,
        m,
        l2,
        nc1: n * t / 100.0,
        nc2: n * t / 500.0,
        bert_cost: (t / 500.0) * n + 2.0 * n,
        llm_cost: 2.0 * t * n + n * l2 * 3.0,
        rerank_sentence: n * (t / 100.0).powi(2),
        rerank_passage,
        rerank_topic,
    }
}

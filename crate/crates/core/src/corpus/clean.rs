use std::collections::BTreeMap;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::PassageChunk;
use crate::gateway::{BackendError, FailurePolicy, QualityScorer};

pub const RULE_URL_DENSITY: &str = "url_density";
pub const RULE_TABLE_LIKE: &str = "table_like";
pub const RULE_DISCLAIMER: &str = "disclaimer";
pub const RULE_CAPTION: &str = "caption";
pub const RULE_QUALITY: &str = "quality_score";

pub const DEFAULT_DISCLAIMER_KEYWORDS: &[&str] = &[
    "免责声明",
    "重要声明",
    "法律声明",
    "特别声明",
    "分析师声明",
    "分析师承诺",
    "分析师简介",
    "研究员简介",
    "作者简介",
    "机构简介",
    "执业证书",
    "本报告仅供",
    "版权所有",
    "未经许可",
    "联系电话",
    "电子邮箱",
    "disclaimer",
    "all rights reserved",
];

const DEFAULT_CAPTION_PATTERNS: &[&str] = &[
    r"^\s*(?:图表|图|表|附图|附表)\s*[0-9０-９]+",
    r"(?i)^\s*(?:figure|fig\.|table|exhibit|chart)\s*[0-9]+",
    r"^\s*(?:资料来源|数据来源)\s*[:：]",
];

const URL_PATTERN: &str = r"(?i)(?:https?://|www\.)[^\s\p{Han}，。；！？、）)]+";

/// Rule set for passage filtering.
#[derive(Debug, Clone)]
pub struct CleaningRules {
    /// Drop when URL characters exceed this fraction of the passage.
    pub url_density_max: f64,
    /// Drop when digits plus separators exceed this fraction (table residue).
    pub table_ratio_max: f64,
    /// Lowercased keywords marking disclaimers and personal/organisation bios.
    pub disclaimer_keywords: Vec<String>,
    captions: Vec<Regex>,
    url: Regex,
}

impl Default for CleaningRules {
    fn default() -> Self {
        Self::new(
            DEFAULT_DISCLAIMER_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            DEFAULT_CAPTION_PATTERNS.iter().map(|s| s.to_string()).collect(),
        )
        .expect("default cleaning patterns compile")
    }
}

fn is_table_char(c: char) -> bool {
    c.is_ascii_digit()
        || ('０'..='９').contains(&c)
        || c.is_whitespace()
        || matches!(c, '|' | ',' | '，' | '.' | '%' | '％' | '-' | '/' | '+' | ':' | '(' | ')' | '（' | '）')
}

impl CleaningRules {
    pub fn new(keywords: Vec<String>, caption_patterns: Vec<String>) -> Result<Self, regex::Error> {
        let captions = caption_patterns
            .iter()
            .map(|p| Regex::new(&format!("(?m){p}")))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            url_density_max: 0.1,
            table_ratio_max: 0.4,
            disclaimer_keywords: keywords.into_iter().map(|k| k.to_lowercase()).collect(),
            captions,
            url: Regex::new(URL_PATTERN)?,
        })
    }

    /// Names of every rule `text` trips, in fixed order.
    pub fn violations(&self, text: &str) -> Vec<&'static str> {
        let total = text.chars().count();
        if total == 0 {
            return Vec::new();
        }
        let mut hits = Vec::new();
        let url_chars: usize = self
            .url
            .find_iter(text)
            .map(|m| m.as_str().chars().count())
            .sum();
        if url_chars as f64 / total as f64 > self.url_density_max {
            hits.push(RULE_URL_DENSITY);
        }
        let table_chars = text.chars().filter(|c| is_table_char(*c)).count();
        if table_chars as f64 / total as f64 > self.table_ratio_max {
            hits.push(RULE_TABLE_LIKE);
        }
        let lower = text.to_lowercase();
        if self.disclaimer_keywords.iter().any(|k| lower.contains(k.as_str())) {
            hits.push(RULE_DISCLAIMER);
        }
        if self.captions.iter().any(|r| r.is_match(text)) {
            hits.push(RULE_CAPTION);
        }
        hits
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub total: usize,
    pub dropped: usize,
    pub drop_fraction: f64,
    pub per_rule_counts: BTreeMap<String, usize>,
    /// Passages whose quality score could not be obtained and were judged by
    /// rules alone.
    #[serde(default)]
    pub scorer_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedPassage {
    pub passage: PassageChunk,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct CleanOutcome {
    pub kept: Vec<PassageChunk>,
    pub dropped: Vec<DroppedPassage>,
    pub report: CleaningReport,
}

enum Verdict {
    Keep { scorer_failed: bool },
    Drop(Vec<String>),
}

/// Drops a passage when any rule fires or its quality score is below
/// `drop_threshold`. The scorer is only consulted for passages that pass the
/// rules. Input order is preserved in both outputs.
pub fn clean_passages(
    passages: Vec<PassageChunk>,
    rules: &CleaningRules,
    scorer: &dyn QualityScorer,
    drop_threshold: f64,
    on_scorer_failure: FailurePolicy,
) -> Result<CleanOutcome, BackendError> {
    let verdicts: Vec<Verdict> = passages
        .par_iter()
        .map(|p| {
            let hits = rules.violations(&p.text);
            if !hits.is_empty() {
                return Ok(Verdict::Drop(hits.into_iter().map(String::from).collect()));
            }
            match scorer.score(&p.text) {
                Ok(q) if q < drop_threshold => Ok(Verdict::Drop(vec![RULE_QUALITY.to_string()])),
                Ok(_) => Ok(Verdict::Keep { scorer_failed: false }),
                Err(e) if on_scorer_failure == FailurePolicy::Fallback => {
                    log::warn!("quality scorer failed on {} ({e}); rules only", p.passage_id);
                    Ok(Verdict::Keep { scorer_failed: true })
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, BackendError>>()?;

    let mut out = CleanOutcome::default();
    out.report.total = passages.len();
    for (p, v) in passages.into_iter().zip(verdicts) {
        match v {
            Verdict::Keep { scorer_failed } => {
                out.report.scorer_failures += usize::from(scorer_failed);
                out.kept.push(p);
            }
            Verdict::Drop(reasons) => {
                for r in &reasons {
                    *out.report.per_rule_counts.entry(r.clone()).or_insert(0) += 1;
                }
                out.dropped.push(DroppedPassage { passage: p, reasons });
            }
        }
    }
    out.report.dropped = out.dropped.len();
    out.report.drop_fraction = if out.report.total == 0 {
        0.0
    } else {
        out.report.dropped as f64 / out.report.total as f64
    };
    Ok(out)
}

//! Audit of mined pairs: score bins, seeded sampling, LLM judging and
//! false-positive / false-negative rates.

mod judge;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bottom_up::QueryLevel;
use crate::gateway::{BackendError, Backends};
use crate::io::{to_jsonl, write_atomic};
use crate::relevance::ScoredPair;
use crate::text::fnv1a64;

pub use judge::{build_judge_prompt, judge_pair, parse_judge_response, JUDGE_TEMPLATE};

/// Lower bounds of the eight bins, top bin first.
pub const BIN_LOWER: [f64; 8] = [0.99, 0.97, 0.95, 0.93, 0.91, 0.89, 0.87, 0.85];
pub const DEFAULT_PER_BIN: usize = 50;

pub fn bin_bounds(i: usize) -> (f64, f64) {
    let upper = if i == 0 { 1.0 } else { BIN_LOWER[i - 1] };
    (BIN_LOWER[i], upper)
}

/// Lower-inclusive, upper-exclusive, except the top bin which also holds 1.0.
pub fn bin_index(score: f64) -> Option<usize> {
    if !(BIN_LOWER[7]..=1.0).contains(&score) {
        return None;
    }
    BIN_LOWER.iter().position(|lo| score >= *lo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBin {
    pub lower: f64,
    pub upper: f64,
    /// Pairs that fell in the bin before sampling.
    pub total: usize,
    pub samples: Vec<ScoredPair>,
}

fn pair_order(a: &ScoredPair, b: &ScoredPair) -> std::cmp::Ordering {
    (a.level, &a.query_a_id, &a.query_b_id, &a.space_id)
        .cmp(&(b.level, &b.query_a_id, &b.query_b_id, &b.space_id))
        .then(a.score.total_cmp(&b.score))
}

/// Eight bins, each with a uniform seeded sample of at most `per_bin`
/// pairs. Input order does not matter.
pub fn bin_and_sample(pairs: &[ScoredPair], per_bin: usize, seed: u64) -> Vec<IntervalBin> {
    let mut members: Vec<Vec<&ScoredPair>> = vec![Vec::new(); BIN_LOWER.len()];
    for p in pairs {
        if let Some(i) = bin_index(p.score) {
            members[i].push(p);
        }
    }
    members
        .into_iter()
        .enumerate()
        .map(|(i, mut m)| {
            m.sort_by(|a, b| pair_order(a, b));
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(&(i as u64).to_le_bytes()));
            let mut picked = sample(&mut rng, m.len(), per_bin.min(m.len())).into_vec();
            picked.sort_unstable();
            let (lower, upper) = bin_bounds(i);
            IntervalBin {
                lower,
                upper,
                total: m.len(),
                samples: picked.into_iter().map(|k| m[k].clone()).collect(),
            }
        })
        .collect()
}

/// One judged (or unjudgeable) sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeScore {
    pub pair: ScoredPair,
    /// 1..=5; `None` when no rating could be read after retries.
    pub rating: Option<u8>,
    pub rationale: String,
    /// Raw replies, one per attempt.
    pub transcript: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub above: usize,
    pub false_positives: usize,
    pub fp_rate: Option<f64>,
    pub below: usize,
    pub false_negatives: usize,
    pub fn_rate: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// FP: at/above threshold rated below 3. FN: below threshold rated above 3.
/// Unjudged samples are ignored; a rating of 3 counts in neither numerator.
pub fn rates<'a>(judged: impl IntoIterator<Item = &'a JudgeScore>, threshold: f64) -> Rates {
    let mut r = Rates::default();
    for j in judged {
        let Some(rating) = j.rating else { continue };
        if j.pair.score >= threshold {
            r.above += 1;
            r.false_positives += usize::from(rating < 3);
        } else {
            r.below += 1;
            r.false_negatives += usize::from(rating > 3);
        }
    }
    r.fp_rate = ratio(r.false_positives, r.above);
    r.fn_rate = ratio(r.false_negatives, r.below);
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub level: QueryLevel,
    pub lower: f64,
    pub upper: f64,
    pub total: usize,
    pub sampled: usize,
    pub judged: usize,
    pub mean_rating: Option<f64>,
    pub rated_above_3: usize,
    pub rated_3: usize,
    pub rated_below_3: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub bins: Vec<BinSummary>,
    pub pooled: Rates,
    pub per_level: BTreeMap<QueryLevel, Rates>,
}

/// Bins are per level: `(level, bin)` with the judged samples of that bin.
pub fn estimate_rates(bins: &[(QueryLevel, IntervalBin, Vec<JudgeScore>)], threshold: f64) -> AuditReport {
    let mut report = AuditReport::default();
    for (level, bin, judged) in bins {
        let ratings: Vec<u8> = judged.iter().filter_map(|j| j.rating).collect();
        report.bins.push(BinSummary {
            level: *level,
            lower: bin.lower,
            upper: bin.upper,
            total: bin.total,
            sampled: bin.samples.len(),
            judged: ratings.len(),
            mean_rating: (!ratings.is_empty())
                .then(|| ratings.iter().map(|r| f64::from(*r)).sum::<f64>() / ratings.len() as f64),
            rated_above_3: ratings.iter().filter(|r| **r > 3).count(),
            rated_3: ratings.iter().filter(|r| **r == 3).count(),
            rated_below_3: ratings.iter().filter(|r| **r < 3).count(),
        });
    }
    let all: Vec<&JudgeScore> = bins.iter().flat_map(|(_, _, j)| j.iter()).collect();
    report.pooled = rates(all.iter().copied(), threshold);
    for level in [QueryLevel::Sentence, QueryLevel::Passage, QueryLevel::Topic] {
        if bins.iter().any(|(l, b, _)| *l == level && b.total > 0) {
            let judged = bins.iter().filter(|(l, _, _)| *l == level).flat_map(|(_, _, j)| j.iter());
            report.per_level.insert(level, rates(judged, threshold));
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub per_bin: usize,
    pub threshold: f64,
    pub retries: u32,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            per_bin: DEFAULT_PER_BIN,
            threshold: 0.99,
            retries: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditOutcome {
    pub report: AuditReport,
    pub judged: Vec<JudgeScore>,
}

/// Samples each level's audit log, judges the samples and computes rates.
pub fn run_audit(log: &[ScoredPair], backends: &Backends, cfg: &AuditConfig) -> Result<AuditOutcome, BackendError> {
    let mut per_level: Vec<(QueryLevel, IntervalBin, Vec<JudgeScore>)> = Vec::new();
    for level in [QueryLevel::Sentence, QueryLevel::Passage, QueryLevel::Topic] {
        let pairs: Vec<ScoredPair> = log.iter().filter(|p| p.level == level).cloned().collect();
        if pairs.is_empty() {
            continue;
        }
        let seed = cfg.seed ^ fnv1a64(level.as_str().as_bytes());
        for bin in bin_and_sample(&pairs, cfg.per_bin, seed) {
            let judged = bin
                .samples
                .par_iter()
                .map(|p| judge_pair(p, backends, cfg.retries))
                .collect::<Result<Vec<_>, _>>()?;
            per_level.push((level, bin, judged));
        }
    }
    let report = estimate_rates(&per_level, cfg.threshold);
    let judged = per_level.into_iter().flat_map(|(_, _, j)| j).collect();
    Ok(AuditOutcome { report, judged })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

pub fn render_histogram(report: &AuditReport) -> String {
    let mut s = String::from("level\tbin\ttotal\tsampled\tjudged\tmean_rating\trated_gt3\trated_eq3\trated_lt3\n");
    for b in &report.bins {
        let _ = writeln!(
            s,
            "{}\t[{:.2},{:.2}{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            b.level.as_str(),
            b.lower,
            b.upper,
            if b.upper >= 1.0 { "]" } else { ")" },
            b.total,
            b.sampled,
            b.judged,
            opt(b.mean_rating),
            b.rated_above_3,
            b.rated_3,
            b.rated_below_3
        );
    }
    s
}

pub fn render_rates(report: &AuditReport) -> String {
    let mut s = String::from("scope\tabove\tfalse_positives\tfp_rate\tbelow\tfalse_negatives\tfn_rate\n");
    let mut row = |scope: &str, r: &Rates| {
        let _ = writeln!(
            s,
            "{scope}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.above,
            r.false_positives,
            opt(r.fp_rate),
            r.below,
            r.false_negatives,
            opt(r.fn_rate)
        );
    };
    if report.bins.is_empty() {
        return s;
    }
    for (level, r) in &report.per_level {
        row(level.as_str(), r);
    }
    row("pooled", &report.pooled);
    s
}

/// `audit_histogram.tsv`, `audit_report.tsv` and `judge_transcripts.jsonl`.
pub fn emit_audit(dir: &Path, outcome: &AuditOutcome) -> io::Result<()> {
    write_atomic(&dir.join("audit_histogram.tsv"), render_histogram(&outcome.report).as_bytes())?;
    write_atomic(&dir.join("audit_report.tsv"), render_rates(&outcome.report).as_bytes())?;
    write_atomic(&dir.join("judge_transcripts.jsonl"), to_jsonl(&outcome.judged).as_bytes())
}

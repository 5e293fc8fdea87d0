use std::f64::consts::TAU;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub const PERIODS_DAYS: [f64; 3] = [7.0, 30.4375, 365.25];
pub const DEFAULT_TEMPORAL_WEIGHT: f64 = 0.1;

/// `[sin, cos]` pairs at week, month and year periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalEncoding(pub [f64; 6]);

impl TemporalEncoding {
    pub fn values(&self) -> &[f64; 6] {
        &self.0
    }
}

pub fn encode_days(d: f64) -> TemporalEncoding {
    let mut v = [0.0; 6];
    for (k, period) in PERIODS_DAYS.iter().enumerate() {
        let (s, c) = (TAU * d / period).sin_cos();
        v[2 * k] = s;
        v[2 * k + 1] = c;
    }
    TemporalEncoding(v)
}

/// Encodes the signed whole-day displacement of `date` from `reference`.
pub fn encode_time(date: NaiveDate, reference: NaiveDate) -> TemporalEncoding {
    encode_days((date - reference).num_days() as f64)
}

/// Title embedding (re-normalised) followed by the weighted time block.
pub fn build_features(embedding: &[f64], time: &TemporalEncoding, weight: f64) -> Vec<f64> {
    let norm = embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut out: Vec<f64> = if norm > 0.0 {
        embedding.iter().map(|x| x / norm).collect()
    } else {
        embedding.to_vec()
    };
    out.extend(time.0.iter().map(|x| weight * x));
    out
}

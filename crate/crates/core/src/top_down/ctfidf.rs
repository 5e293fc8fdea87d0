use std::collections::BTreeMap;

use crate::text::is_cjk;

/// Lowercased ASCII-alphanumeric words plus character bigrams of CJK runs
/// (a lone CJK character is kept as a unigram).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut latin = String::new();
    let mut cjk: Vec<char> = Vec::new();
    let flush_cjk = |cjk: &mut Vec<char>, out: &mut Vec<String>| {
        match cjk.len() {
            0 => {}
            1 => out.push(cjk[0].to_string()),
            _ => out.extend(cjk.windows(2).map(|w| w.iter().collect::<String>())),
        }
        cjk.clear();
    };
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            flush_cjk(&mut cjk, &mut out);
            latin.push(c.to_ascii_lowercase());
        } else {
            if !latin.is_empty() {
                out.push(std::mem::take(&mut latin));
            }
            if is_cjk(c) {
                cjk.push(c);
            } else {
                flush_cjk(&mut cjk, &mut out);
            }
        }
    }
    if !latin.is_empty() {
        out.push(latin);
    }
    flush_cjk(&mut cjk, &mut out);
    out
}

/// Corpus-level statistics: total count per term and mean tokens per class.
#[derive(Debug, Clone, Default)]
pub struct ClassStats {
    pub term_totals: BTreeMap<String, usize>,
    pub avg_class_tokens: f64,
}

impl ClassStats {
    pub fn from_classes(classes: &[Vec<String>]) -> Self {
        let mut term_totals = BTreeMap::new();
        let mut tokens = 0usize;
        for c in classes {
            tokens += c.len();
            for t in c {
                *term_totals.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let avg_class_tokens = if classes.is_empty() { 0.0 } else { tokens as f64 / classes.len() as f64 };
        Self { term_totals, avg_class_tokens }
    }

    /// `tf(t,c) * ln(1 + A / tf(t))` for every term of `class`.
    pub fn weights(&self, class: &[String]) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
        for t in class {
            *tf.entry(t).or_insert(0) += 1;
        }
        tf.into_iter()
            .map(|(t, n)| {
                // terms unseen in the global statistics count only themselves
                let total = self.term_totals.get(t).copied().unwrap_or(n).max(n);
                let w = n as f64 * (1.0 + self.avg_class_tokens / total as f64).ln();
                (t.to_string(), w)
            })
            .collect()
    }

    /// Best `top_k` terms by weight, ties lexicographic.
    pub fn top_terms(&self, class: &[String], top_k: usize) -> Vec<(String, f64)> {
        let mut w: Vec<(String, f64)> = self.weights(class).into_iter().filter(|(_, w)| *w > 0.0).collect();
        w.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        w.truncate(top_k);
        w
    }
}

/// Keywords for each class against the statistics of the classes themselves.
pub fn ctfidf_keywords(classes: &[Vec<String>], top_k: usize) -> Vec<Vec<String>> {
    let stats = ClassStats::from_classes(classes);
    classes
        .iter()
        .map(|c| stats.top_terms(c, top_k).into_iter().map(|(t, _)| t).collect())
        .collect()
}

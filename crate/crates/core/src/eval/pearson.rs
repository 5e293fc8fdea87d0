use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::EvalError;

/// Pearson r; NaN when either side has zero variance or fewer than 2 values.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return f64::NAN;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Benchmark scores, one row per model and one column per subset.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultMatrix {
    pub models: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ResultMatrix {
    fn by_model(&self) -> BTreeMap<&str, &Vec<f64>> {
        self.models.iter().map(String::as_str).zip(&self.values).collect()
    }
}

/// TSV with header `model<TAB>col...` and one row per model.
pub fn parse_result_matrix(text: &str) -> Result<ResultMatrix, EvalError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(EvalError::Parse { line: 1, message: "empty matrix".into() })?;
    let columns: Vec<String> = header.split('\t').skip(1).map(|s| s.trim().to_string()).collect();
    let mut m = ResultMatrix { models: vec![], columns, values: vec![] };
    for (i, line) in lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != m.columns.len() + 1 {
            return Err(EvalError::Parse {
                line: i + 1,
                message: format!("expected {} fields, got {}", m.columns.len() + 1, f.len()),
            });
        }
        let row = f[1..]
            .iter()
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| EvalError::Parse {
                    line: i + 1,
                    message: format!("bad number {v:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        m.models.push(f[0].trim().to_string());
        m.values.push(row);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub shared_models: Vec<String>,
}

/// Entry (i, j): correlation of column i of `a` with column j of `b` over
/// the models both matrices report.
pub fn pearson_matrix(a: &ResultMatrix, b: &ResultMatrix) -> Result<CorrelationMatrix, EvalError> {
    let (ma, mb) = (a.by_model(), b.by_model());
    let shared: Vec<&str> = ma.keys().filter(|m| mb.contains_key(*m)).copied().collect();
    if shared.len() < 3 {
        return Err(EvalError::TooFewModels(shared.len()));
    }
    let column = |m: &BTreeMap<&str, &Vec<f64>>, j: usize| -> Vec<f64> { shared.iter().map(|s| m[s][j]).collect() };
    let mut values = vec![vec![0.0; b.columns.len()]; a.columns.len()];
    for (i, row) in values.iter_mut().enumerate() {
        let x = column(&ma, i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = pearson(&x, &column(&mb, j));
            if v.is_nan() {
                log::warn!("zero variance: {} vs {}; correlation undefined", a.columns[i], b.columns[j]);
            }
        }
    }
    Ok(CorrelationMatrix {
        rows: a.columns.clone(),
        columns: b.columns.clone(),
        values,
        shared_models: shared.into_iter().map(String::from).collect(),
    })
}

pub fn render_matrix(m: &CorrelationMatrix) -> String {
    let mut s = String::from("subset");
    for c in &m.columns {
        let _ = write!(s, "\t{c}");
    }
    s.push('\n');
    for (r, row) in m.rows.iter().zip(&m.values) {
        s.push_str(r);
        for v in row {
            if v.is_nan() {
                s.push_str("\tNaN");
            } else {
                let _ = write!(s, "\t{v:.4}");
            }
        }
        s.push('\n');
    }
    s
}

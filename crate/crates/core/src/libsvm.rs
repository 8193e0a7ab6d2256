//! Reading and writing the LIBSVM sparse text format.
//!
//! Each non-blank line is `<label> <idx>:<value> ...` with 1-based, strictly
//! ascending indices. Features are stored densely.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `N × d`, row `i` is sample `zᵢ`.
    pub features: DMatrix<f64>,
    /// Labels in `{−1, +1}`.
    pub labels: DVector<f64>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "Dataset::new",
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::Config("labels must be ±1".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

struct Row {
    line: usize,
    label: f64,
    entries: Vec<(usize, f64)>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_number(tok: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite {what} `{tok}`")));
    }
    Ok(v)
}

fn parse_row(text: &str, line: usize) -> Result<Row> {
    let mut toks = text.split_whitespace();
    let label = parse_number(toks.next().expect("non-blank line"), line, "label")?;
    let mut entries = Vec::new();
    let mut last = 0usize;
    for tok in toks {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| parse_err(line, format!("expected idx:value, got `{tok}`")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| parse_err(line, format!("invalid index `{idx}`")))?;
        if idx == 0 {
            return Err(parse_err(line, "feature indices are 1-based"));
        }
        if idx <= last {
            return Err(parse_err(line, format!("index {idx} not strictly ascending")));
        }
        last = idx;
        entries.push((idx - 1, parse_number(val, line, "value")?));
    }
    Ok(Row {
        line,
        label,
        entries,
    })
}

/// Maps the raw labels onto `{−1, +1}`. A two-valued set `{a < b}` maps
/// `a ↦ −1`, `b ↦ +1` (so `{0, 1}` and `{−1, +1}` behave as expected); a
/// single label must already be `1`, `−1` or `0`.
fn map_labels(rows: &[Row]) -> Result<Vec<f64>> {
    let mut distinct: Vec<f64> = Vec::new();
    for r in rows {
        if !distinct.contains(&r.label) {
            distinct.push(r.label);
            if distinct.len() > 2 {
                return Err(parse_err(r.line, "more than two distinct labels"));
            }
        }
    }
    distinct.sort_by(f64::total_cmp);
    if distinct.len() == 1 {
        let y = match distinct[0] {
            v if v == 1.0 => 1.0,
            v if v == -1.0 || v == 0.0 => -1.0,
            v => return Err(parse_err(rows[0].line, format!("cannot map single label {v}"))),
        };
        return Ok(vec![y; rows.len()]);
    }
    Ok(rows
        .iter()
        .map(|r| if r.label == distinct[0] { -1.0 } else { 1.0 })
        .collect())
}

/// Parses LIBSVM text. `dim_hint` fixes the feature dimension (must cover
/// every index present).
pub fn parse_libsvm_str(text: &str, dim_hint: Option<usize>) -> Result<Dataset> {
    let mut rows = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line = raw.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        rows.push(parse_row(line, i + 1)?);
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no samples"));
    }
    let max_idx = rows
        .iter()
        .filter_map(|r| r.entries.last().map(|e| e.0 + 1))
        .max()
        .unwrap_or(0);
    let dim = match dim_hint {
        Some(d) if d < max_idx => {
            let line = rows
                .iter()
                .find(|r| r.entries.last().is_some_and(|e| e.0 + 1 > d))
                .map_or(0, |r| r.line);
            return Err(parse_err(line, format!("index {max_idx} exceeds dimension {d}")));
        }
        Some(d) => d,
        None => max_idx,
    };
    let labels = map_labels(&rows)?;
    let mut features = DMatrix::zeros(rows.len(), dim);
    for (i, r) in rows.iter().enumerate() {
        for &(j, v) in &r.entries {
            features[(i, j)] = v;
        }
    }
    Ok(Dataset {
        features,
        labels: DVector::from_vec(labels),
    })
}

pub fn parse_libsvm(path: impl AsRef<Path>, dim_hint: Option<usize>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_libsvm_str(&text, dim_hint)
}

/// Serializes with shortest round-trip float formatting; zeros are omitted.
pub fn write_libsvm_string(data: &Dataset) -> String {
    let mut out = String::new();
    for (i, y) in data.labels.iter().enumerate() {
        out.push_str(if *y > 0.0 { "+1" } else { "-1" });
        for (j, v) in data.features.row(i).iter().enumerate() {
            if *v != 0.0 {
                let _ = write!(out, " {}:{}", j + 1, v);
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_libsvm(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_libsvm_string(data))?;
    Ok(())
}

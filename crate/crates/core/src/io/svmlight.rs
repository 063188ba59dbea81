//! The svmlight text format: `label idx:val idx:val ...` with 1-based,
//! strictly increasing indices and `#` comments.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::losses::CostMatrix;
use crate::model::Dataset;
use crate::sparse::SparseVec;

/// Parsed rows with 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmlightData {
    pub rows: Vec<SparseVec>,
    pub labels: Vec<f64>,
    pub dim: usize,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Strips a trailing comment and surrounding whitespace.
fn content(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

/// Parses svmlight text. The dimension is the largest index unless `dim` is given.
pub fn parse_svmlight<R: BufRead>(reader: R, dim: Option<usize>) -> Result<SvmlightData> {
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0;
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let body = content(&line);
        if body.is_empty() {
            continue;
        }
        let mut tokens = body.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_error(lineno, format!("bad label {label_tok:?}")))?;
        if !label.is_finite() {
            return Err(parse_error(lineno, format!("non-finite label {label_tok:?}")));
        }
        let mut row = Vec::new();
        let mut last = 0;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_error(lineno, format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_error(lineno, format!("bad index in {tok:?}")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| parse_error(lineno, format!("bad value in {tok:?}")))?;
            if idx == 0 {
                return Err(parse_error(lineno, "indices are 1-based"));
            }
            if idx <= last {
                return Err(parse_error(
                    lineno,
                    format!("indices not strictly increasing ({last} then {idx})"),
                ));
            }
            if !val.is_finite() {
                return Err(parse_error(lineno, format!("non-finite value in {tok:?}")));
            }
            if let Some(d) = dim {
                if idx > d {
                    return Err(parse_error(lineno, format!("index {idx} exceeds dimension {d}")));
                }
            }
            last = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(last);
        entries.push(row);
        labels.push(label);
    }
    let dim = dim.unwrap_or(max_index).max(1);
    let rows = entries
        .into_iter()
        .map(|row| SparseVec::new(dim, row))
        .collect::<Result<Vec<_>>>()?;
    Ok(SvmlightData { rows, labels, dim })
}

pub fn read_svmlight(path: &Path, dim: Option<usize>) -> Result<SvmlightData> {
    parse_svmlight(BufReader::new(File::open(path)?), dim)
}

impl SvmlightData {
    /// One feature column per example, real labels.
    pub fn into_binary(self) -> Result<Dataset> {
        Dataset::from_rows(self.rows, self.labels)
    }

    /// Positive integer labels `1..=k` mapped to `0..k`, with class-blocked
    /// features. `k` is the largest label unless given.
    pub fn multiclass_labels(&self, classes: Option<usize>) -> Result<(Vec<usize>, usize)> {
        let mut out = Vec::with_capacity(self.labels.len());
        for (i, &y) in self.labels.iter().enumerate() {
            if y.fract() != 0.0 || y < 1.0 {
                return Err(Error::invalid(format!(
                    "example {i}: multiclass labels must be positive integers, got {y}"
                )));
            }
            out.push(y as usize - 1);
        }
        let k = classes.unwrap_or_else(|| out.iter().max().map_or(0, |m| m + 1));
        if let Some(&bad) = out.iter().find(|&&y| y >= k) {
            return Err(Error::invalid(format!("label {} exceeds {k} classes", bad + 1)));
        }
        Ok((out, k))
    }

    pub fn into_multiclass(self, classes: Option<usize>) -> Result<Dataset> {
        let (labels, k) = self.multiclass_labels(classes)?;
        Dataset::class_blocked(&self.rows, labels, k)
    }
}

/// Writes rows in svmlight format; the output parses back to the same values.
pub fn write_svmlight<W: Write>(mut out: W, rows: &[SparseVec], labels: &[f64]) -> Result<()> {
    if rows.len() != labels.len() {
        return Err(Error::invalid("rows and labels differ in length"));
    }
    for (row, y) in rows.iter().zip(labels) {
        write!(out, "{y}")?;
        for (j, v) in row.iter() {
            write!(out, " {}:{v}", j + 1)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a square cost matrix, one whitespace-separated row per true label.
pub fn parse_cost_matrix<R: BufRead>(reader: R) -> Result<CostMatrix> {
    let mut rows = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let body = content(&line);
        if body.is_empty() {
            continue;
        }
        let row = body
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_error(k + 1, format!("bad cost {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    CostMatrix::new(rows)
}

//! LIBSVM text format: `label idx:val idx:val ...` with 1-based, strictly
//! ascending feature indices. Indices are stored 0-based internally.

use std::io::{BufRead, Write};

use super::SparseColMatrix;
use crate::{Error, Result};

/// A parsed LIBSVM file: a sample-major matrix (rows are samples, columns are
/// features) and one label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LibsvmData {
    pub samples: SparseColMatrix,
    pub labels: Vec<f64>,
}

impl LibsvmData {
    pub fn n_samples(&self) -> usize {
        self.samples.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.samples.n_cols()
    }
}

/// Reads LIBSVM records. Blank lines and `#` comments are skipped; `qid:`
/// tokens are ignored. The feature dimension is the largest index seen.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<LibsvmData> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut n_features = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let parse_err = |msg: String| Error::Parse { line: lineno, msg };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(format!("invalid label {label_tok:?}")))?;

        let mut row = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(format!("expected idx:val, found {tok:?}")))?;
            if idx == "qid" {
                continue;
            }
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(format!("invalid feature index in {tok:?}")))?;
            if idx == 0 {
                return Err(parse_err("feature indices are 1-based; found 0".into()));
            }
            if idx <= prev {
                return Err(parse_err(format!(
                    "feature indices must be strictly ascending ({idx} after {prev})"
                )));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(format!("invalid feature value in {tok:?}")))?;
            prev = idx;
            row.push((idx - 1, val));
        }
        n_features = n_features.max(prev);
        labels.push(label);
        rows.push(row);
    }

    let mut columns = vec![Vec::new(); n_features];
    for (r, row) in rows.into_iter().enumerate() {
        for (c, v) in row {
            columns[c].push((r, v));
        }
    }
    let samples = SparseColMatrix::from_columns(labels.len(), columns)?;
    Ok(LibsvmData { samples, labels })
}

/// Writes records in LIBSVM format. Floats use the shortest representation
/// that parses back to the same value.
pub fn write_libsvm<W: Write>(data: &LibsvmData, mut out: W) -> Result<()> {
    let rows = data.samples.transpose();
    for (r, label) in data.labels.iter().enumerate() {
        write!(out, "{label}")?;
        let row = rows.col(r);
        for (&c, &v) in row.indices.iter().zip(row.values) {
            write!(out, " {}:{v}", c + 1)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

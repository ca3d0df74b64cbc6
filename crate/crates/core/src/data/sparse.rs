use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Column-compressed sparse matrix with `n_rows x n_cols` entries.
///
/// Row indices inside each column are strictly increasing. Explicit zeros are
/// allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseColMatrix {
    n_rows: usize,
    n_cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Borrowed view of one column.
#[derive(Debug, Clone, Copy)]
pub struct SparseCol<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

impl SparseCol<'_> {
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&r, &v)| v * dense[r])
            .sum()
    }

    /// `dense += alpha * column`
    pub fn axpy(&self, alpha: f64, dense: &mut [f64]) {
        for (&r, &v) in self.indices.iter().zip(self.values) {
            dense[r] += alpha * v;
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

impl SparseColMatrix {
    /// Builds a matrix from per-column `(row, value)` lists.
    pub fn from_columns(n_rows: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n_cols = columns.len();
        let nnz = columns.iter().map(Vec::len).sum();
        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        col_ptr.push(0);
        for (c, col) in columns.into_iter().enumerate() {
            let mut prev: Option<usize> = None;
            for (r, v) in col {
                if r >= n_rows {
                    return Err(Error::config(format!(
                        "column {c}: row index {r} out of range for {n_rows} rows"
                    )));
                }
                if prev.is_some_and(|p| r <= p) {
                    return Err(Error::config(format!(
                        "column {c}: row indices must be strictly increasing"
                    )));
                }
                prev = Some(r);
                row_idx.push(r);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self { n_rows, n_cols, col_ptr, row_idx, values })
    }

    /// Builds a matrix from dense rows, dropping exact zeros.
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::new(); n_cols];
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n_cols, "ragged dense input");
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    columns[c].push((r, v));
                }
            }
        }
        Self::from_columns(n_rows, columns).expect("dense input is always valid")
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            col_ptr: vec![0; n_cols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col(&self, i: usize) -> SparseCol<'_> {
        let (lo, hi) = (self.col_ptr[i], self.col_ptr[i + 1]);
        SparseCol { indices: &self.row_idx[lo..hi], values: &self.values[lo..hi] }
    }

    pub fn col_norms_sq(&self) -> Vec<f64> {
        (0..self.n_cols).map(|i| self.col(i).norm_sq()).collect()
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut out = vec![0.0; self.n_rows];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                self.col(i).axpy(xi, &mut out);
            }
        }
        out
    }

    /// `A^T y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n_rows);
        (0..self.n_cols).map(|i| self.col(i).dot(y)).collect()
    }

    /// `A_S x_S` for a subset `S` of columns with matching values.
    pub fn mul_block(&self, block: &[usize], x_block: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for (&i, &xi) in block.iter().zip(x_block) {
            if xi != 0.0 {
                self.col(i).axpy(xi, &mut out);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_rows + 1];
        for &r in &self.row_idx {
            counts[r + 1] += 1;
        }
        for r in 0..self.n_rows {
            counts[r + 1] += counts[r];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Visiting source columns in order keeps the new row indices sorted.
        for c in 0..self.n_cols {
            let col = self.col(c);
            for (&r, &v) in col.indices.iter().zip(col.values) {
                let slot = next[r];
                row_idx[slot] = c;
                values[slot] = v;
                next[r] += 1;
            }
        }
        Self { n_rows: self.n_cols, n_cols: self.n_rows, col_ptr, row_idx, values }
    }

    /// Dense row-major copy, for tests and small oracles.
    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        let mut rows = vec![vec![0.0; self.n_cols]; self.n_rows];
        for c in 0..self.n_cols {
            let col = self.col(c);
            for (&r, &v) in col.indices.iter().zip(col.values) {
                rows[r][c] = v;
            }
        }
        rows
    }

    /// Submatrix made of the given columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let columns = cols
            .iter()
            .map(|&c| {
                let col = self.col(c);
                col.indices.iter().copied().zip(col.values.iter().copied()).collect()
            })
            .collect();
        Self::from_columns(self.n_rows, columns).expect("columns of a valid matrix")
    }

    pub(crate) fn raw_parts(&self) -> (&[usize], &[usize], &[f64]) {
        (&self.col_ptr, &self.row_idx, &self.values)
    }
}

/// Which axis of a sample-major matrix becomes the column axis of `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Columns of `A` are features (rows are samples).
    Features,
    /// Columns of `A` are samples (rows are features).
    Samples,
}

/// Maps a sample-major matrix (rows = samples) to the requested column axis.
pub fn transpose_to_columns(samples: &SparseColMatrix, orientation: Orientation) -> SparseColMatrix {
    match orientation {
        Orientation::Features => samples.clone(),
        Orientation::Samples => samples.transpose(),
    }
}

//! Canonical compressed sparse row storage.
//!
//! Every `SparseMatrix` is kept in canonical form: column indices strictly
//! increasing within each row and no explicitly stored zeros. Entrywise
//! comparisons and linear combinations can then be done with a single
//! merged traversal of two row patterns.

use crate::error::{ensure_finite, ensure_len, LcpError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, rejecting anything non-canonical.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(LcpError::InvalidMatrix(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 || row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(LcpError::InvalidMatrix(
                "row_offsets must start at 0 and be nondecreasing".into(),
            ));
        }
        if col_indices.len() != values.len() || row_offsets[n_rows] != values.len() {
            return Err(LcpError::InvalidMatrix(
                "last row offset must equal the number of stored values".into(),
            ));
        }
        ensure_finite(&values, "sparse matrix values")?;
        for row in 0..n_rows {
            let cols = &col_indices[row_offsets[row]..row_offsets[row + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LcpError::InvalidMatrix(format!(
                    "column indices in row {row} are not strictly increasing"
                )));
            }
            if cols.last().is_some_and(|&c| c >= n_cols) {
                return Err(LcpError::InvalidMatrix(format!(
                    "column index out of range in row {row}"
                )));
            }
        }
        if values.contains(&0.0) {
            return Err(LcpError::InvalidMatrix("explicitly stored zero".into()));
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and entries that end up exactly zero are dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(r, c, v) in &sorted {
            if r >= n_rows || c >= n_cols {
                return Err(LcpError::InvalidMatrix(format!(
                    "triplet ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(LcpError::NonFinite {
                    context: "triplet value",
                });
            }
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut iter = sorted.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != 0.0 {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
            }
        }
        for r in 0..n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a matrix from dense rows.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            ensure_len(row, n_cols, "dense row")?;
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(n_rows, n_cols, &triplets)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let triplets: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(n, n, &triplets)
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
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

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored entries of `row` as `(column, value)` pairs in ascending column order.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[row]..self.row_offsets[row + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Iterates over all stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_offsets[row]..self.row_offsets[row + 1];
        match self.col_indices[range.clone()].binary_search(&col) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub(crate) fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(LcpError::NotSquare {
                rows: self.n_rows,
                cols: self.n_cols,
            })
        }
    }

    /// `A x`, summing each row in ascending column order.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len(x, self.n_cols, "spmv")?;
        ensure_finite(x, "spmv input")?;
        let mut out = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked `out = A x` for hot loops; lengths are only debug-asserted.
    pub fn spmv_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        for (row, slot) in out.iter_mut().enumerate() {
            *slot = self.row_dot(row, x);
        }
    }

    #[inline]
    pub(crate) fn row_dot(&self, row: usize, x: &[f64]) -> f64 {
        let start = self.row_offsets[row];
        let end = self.row_offsets[row + 1];
        let mut acc = 0.0;
        for k in start..end {
            acc += self.values[k] * x[self.col_indices[k]];
        }
        acc
    }

    /// The comparison matrix: `|a_ii|` on the diagonal, `-|a_ij|` elsewhere.
    pub fn comparison_matrix(&self) -> Result<Self> {
        self.require_square()?;
        let mut out = self.clone();
        for r in 0..self.n_rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                let v = self.values[k].abs();
                out.values[k] = if self.col_indices[k] == r { v } else { -v };
            }
        }
        Ok(out)
    }

    /// Entrywise absolute value.
    pub fn abs(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.abs());
        out
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        if alpha == 0.0 {
            return Self::zeros(self.n_rows, self.n_cols);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `alpha * self + beta * other` over the union of both patterns.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(LcpError::DimensionMismatch {
                context: "linear_combination",
                expected: self.n_rows * self.n_cols,
                found: other.n_rows * other.n_cols,
            });
        }
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n_rows {
            merge_rows(self, other, r, |c, a, b| {
                let v = alpha * a + beta * b;
                if v != 0.0 {
                    col_indices.push(c);
                    values.push(v);
                }
            });
            row_offsets.push(values.len());
        }
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.linear_combination(1.0, other, -1.0)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.linear_combination(1.0, other, 1.0)
    }

    /// Keeps the entries for which `keep(row, col, value)` holds.
    pub fn filter(&self, mut keep: impl FnMut(usize, usize, f64) -> bool) -> Self {
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                if keep(r, c, v) {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    pub fn is_lower_triangular(&self) -> bool {
        self.triplets().all(|(r, c, _)| c <= r)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.n_rows * self.n_cols];
        for (r, c, v) in self.triplets() {
            dense[r * self.n_cols + c] = v;
        }
        dense
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Walks the union of the patterns of row `r` in `a` and `b` in ascending
/// column order, passing `(col, a_rc, b_rc)` with zeros for missing entries.
pub(crate) fn merge_rows(
    a: &SparseMatrix,
    b: &SparseMatrix,
    r: usize,
    mut f: impl FnMut(usize, f64, f64),
) {
    let (mut i, ie) = (a.row_offsets[r], a.row_offsets[r + 1]);
    let (mut j, je) = (b.row_offsets[r], b.row_offsets[r + 1]);
    while i < ie || j < je {
        let ca = if i < ie { a.col_indices[i] } else { usize::MAX };
        let cb = if j < je { b.col_indices[j] } else { usize::MAX };
        if ca == cb {
            f(ca, a.values[i], b.values[j]);
            i += 1;
            j += 1;
        } else if ca < cb {
            f(ca, a.values[i], 0.0);
            i += 1;
        } else {
            f(cb, 0.0, b.values[j]);
            j += 1;
        }
    }
}

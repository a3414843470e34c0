//! Compressed sparse column storage and the handful of kernels the QP
//! assembly and the splitting solver need.

use serde::{Deserialize, Serialize};

/// Coordinate-format accumulator. Duplicate entries are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            ..Default::default()
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Grows the row count; used when rows are appended incrementally.
    pub fn set_nrows(&mut self, nrows: usize) {
        assert!(nrows >= self.nrows);
        self.nrows = nrows;
    }

    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols, "({row},{col}) out of bounds");
        if val != 0.0 {
            self.rows.push(row);
            self.cols.push(col);
            self.vals.push(val);
        }
    }

    pub fn to_csc(&self) -> CscMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let nnz = self.vals.len();
        let mut rowind = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut next = counts.clone();
        for ((&r, &c), &v) in self.rows.iter().zip(&self.cols).zip(&self.vals) {
            let p = next[c];
            rowind[p] = r;
            values[p] = v;
            next[c] += 1;
        }
        // sort each column by row and merge duplicates
        let mut colptr = vec![0usize; self.ncols + 1];
        let mut out_rows = Vec::with_capacity(nnz);
        let mut out_vals = Vec::with_capacity(nnz);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for c in 0..self.ncols {
            scratch.clear();
            scratch.extend((counts[c]..counts[c + 1]).map(|p| (rowind[p], values[p])));
            scratch.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(r, v) in &scratch {
                if last == Some(r) {
                    *out_vals.last_mut().unwrap() += v;
                } else {
                    out_rows.push(r);
                    out_vals.push(v);
                    last = Some(r);
                }
            }
            colptr[c + 1] = out_rows.len();
        }
        CscMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            colptr,
            rowind: out_rows,
            values: out_vals,
        }
    }
}

/// Sparse matrix in compressed sparse column layout with sorted row indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowind: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            colptr: (0..=n).collect(),
            rowind: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = TripletBuilder::new(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                t.push(i, j, v);
            }
        }
        t.to_csc()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.colptr[j]..self.colptr[j + 1];
        self.rowind[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.colptr[j]..self.colptr[j + 1];
        match self.rowind[range.clone()].binary_search(&i) {
            Ok(p) => self.values[range.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                out[i][j] += v;
            }
        }
        out
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (i, v) in self.col(j) {
                y[i] += v * xj;
            }
        }
    }

    /// y = Aᵀ x
    pub fn mul_t_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = self.col(j).map(|(i, v)| v * x[i]).sum();
        }
    }

    /// y = S x for a symmetric S stored as its upper triangle (including diagonal).
    pub fn sym_upper_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
    }

    pub fn transpose(&self) -> CscMatrix {
        let mut t = TripletBuilder::new(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                t.push(j, i, v);
            }
        }
        t.to_csc()
    }

    /// Scales entry (i, j) by `row[i] * col[j]`.
    pub fn scale_rows_cols(&mut self, row: &[f64], col: &[f64]) {
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                self.values[p] *= row[self.rowind[p]] * col[j];
            }
        }
    }

    /// Infinity norm of every column.
    pub fn col_inf_norms(&self) -> Vec<f64> {
        (0..self.ncols)
            .map(|j| self.col(j).fold(0.0_f64, |m, (_, v)| m.max(v.abs())))
            .collect()
    }

    /// Infinity norm of every row.
    pub fn row_inf_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0_f64; self.nrows];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                out[i] = out[i].max(v.abs());
            }
        }
        out
    }

    /// Column infinity norms of a symmetric matrix stored as its upper triangle.
    pub fn sym_upper_col_inf_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0_f64; self.ncols];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                out[j] = out[j].max(v.abs());
                out[i] = out[i].max(v.abs());
            }
        }
        out
    }

    pub fn is_upper_triangular(&self) -> bool {
        (0..self.ncols).all(|j| self.col(j).all(|(i, _)| i <= j))
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

//! Compressed sparse row matrices tagged with the spaces they map between.

use std::io::Write;

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{CongaError, Result};
use crate::grid::Level;

/// Coefficient space a matrix acts on or produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    /// Broken space `V^ℓ_h`, indexed by multi-indices.
    Broken(Level),
    /// Conforming space `V^{ℓ,c}_h`, indexed by interior geometric elements.
    Conforming(Level),
    /// Untyped coefficient vectors (saddle-point blocks, harmonic coordinates).
    Coefficients,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: Space,
    cols: Space,
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// in insertion order; exact zeros are dropped.
    pub fn from_triplets(
        rows: Space,
        nrows: usize,
        cols: Space,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(r, c, _) in &triplets {
            if r >= nrows {
                return Err(CongaError::IndexOutOfRange { index: r, limit: nrows });
            }
            if c >= ncols {
                return Err(CongaError::IndexOutOfRange { index: c, limit: ncols });
            }
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut rows_of = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if rows_of.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows_of.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows_of.into_iter().zip(col_idx).zip(values) {
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseOperator { rows, cols, nrows, ncols, row_ptr, col_idx: keep_cols, values: keep_vals })
    }

    pub fn identity(space: Space, n: usize) -> Self {
        SparseOperator {
            rows: space,
            cols: space,
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Block-diagonal matrix repeating `block` `count` times.
    pub fn block_diagonal(space: Space, count: usize, block: &Mat<f64>) -> Self {
        let (m, n) = (block.nrows(), block.ncols());
        let mut triplets = Vec::with_capacity(count * m * n);
        for b in 0..count {
            for i in 0..m {
                for j in 0..n {
                    triplets.push((b * m + i, b * n + j, block[(i, j)]));
                }
            }
        }
        Self::from_triplets(space, count * m, space, count * n, triplets).expect("block indices are in range")
    }

    /// Dense matrix converted to sparse form (zeros dropped).
    pub fn from_dense(rows: Space, cols: Space, dense: &Mat<f64>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..dense.nrows() {
            for j in 0..dense.ncols() {
                triplets.push((i, j, dense[(i, j)]));
            }
        }
        Self::from_triplets(rows, dense.nrows(), cols, dense.ncols(), triplets).expect("dense indices are in range")
    }

    pub fn rows_space(&self) -> Space {
        self.rows
    }

    pub fn cols_space(&self) -> Space {
        self.cols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn retag(mut self, rows: Space, cols: Space) -> Self {
        self.rows = rows;
        self.cols = cols;
        self
    }

    /// Entries of row `i` as `(col, value)` pairs in increasing column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Self {
        let triplets = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.cols, self.ncols, self.rows, self.nrows, triplets)
            .expect("transposed indices are in range")
    }

    /// Sparse product `self * rhs`; the column space of `self` must match the
    /// row space of `rhs`.
    pub fn matmul(&self, rhs: &SparseOperator) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(CongaError::SpaceMismatch { left: self.cols, right: rhs.rows });
        }
        if self.ncols != rhs.nrows {
            return Err(CongaError::DimensionMismatch { expected: self.ncols, found: rhs.nrows });
        }
        let mut acc = vec![0.0; rhs.ncols];
        let mut mark = vec![usize::MAX; rhs.ncols];
        let mut touched = Vec::new();
        let mut row_ptr = vec![0; self.nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            for (k, a) in self.row(i) {
                for (j, b) in rhs.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != 0.0 {
                    col_idx.push(j);
                    values.push(acc[j]);
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        Ok(SparseOperator {
            rows: self.rows,
            cols: rhs.cols,
            nrows: self.nrows,
            ncols: rhs.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// `self + alpha * other` for operators between the same spaces.
    pub fn add_scaled(&self, alpha: f64, other: &SparseOperator) -> Result<Self> {
        if self.rows != other.rows {
            return Err(CongaError::SpaceMismatch { left: self.rows, right: other.rows });
        }
        if self.cols != other.cols {
            return Err(CongaError::SpaceMismatch { left: self.cols, right: other.cols });
        }
        if (self.nrows, self.ncols) != (other.nrows, other.ncols) {
            return Err(CongaError::DimensionMismatch { expected: self.nrows, found: other.nrows });
        }
        let triplets = self.triplets().chain(other.triplets().map(|(i, j, v)| (i, j, alpha * v))).collect();
        Self::from_triplets(self.rows, self.nrows, self.cols, self.ncols, triplets)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        if alpha == 0.0 {
            return Self::from_triplets(self.rows, self.nrows, self.cols, self.ncols, Vec::new()).expect("empty");
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(CongaError::DimensionMismatch { expected: self.ncols, found: x.len() });
        }
        Ok((0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect())
    }

    /// `selfᵀ x`.
    pub fn tmul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nrows {
            return Err(CongaError::DimensionMismatch { expected: self.nrows, found: x.len() });
        }
        let mut y = vec![0.0; self.ncols];
        for (i, xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        Ok(y)
    }

    /// Bilinear form `xᵀ self y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let ay = self.mul_vec(y)?;
        if x.len() != ay.len() {
            return Err(CongaError::DimensionMismatch { expected: ay.len(), found: x.len() });
        }
        Ok(x.iter().zip(&ay).map(|(a, b)| a * b).sum())
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let triplets: Vec<Triplet<usize, usize, f64>> =
            self.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &triplets).expect("canonical triplets convert")
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.ncols];
        for (_, j, v) in self.triplets() {
            sums[j] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// `max |A - Aᵀ|`.
    pub fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        self.triplets().map(|(i, j, v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max)
    }

    /// Writes the matrix in Matrix Market coordinate real general format.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "% rows: {:?}, cols: {:?}", self.rows, self.cols)?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

//! Compressed-sparse-row complex matrices.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

/// One stored entry `(row, col, value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub re: f64,
    pub im: f64,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CsrMatrix { rows, cols, row_ptr: vec![0; rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    /// Builds from unordered entries; duplicates are summed, exact zeros dropped.
    pub fn from_entries(rows: usize, cols: usize, entries: impl IntoIterator<Item = (usize, usize, Complex64)>) -> Self {
        let mut per_row: Vec<BTreeMap<usize, Complex64>> = vec![BTreeMap::new(); rows];
        for (r, c, v) in entries {
            assert!(r < rows && c < cols, "entry ({r}, {c}) outside {rows}x{cols}");
            *per_row[r].entry(c).or_insert(ZERO) += v;
        }
        Self::from_rows(rows, cols, per_row)
    }

    fn from_rows(rows: usize, cols: usize, per_row: Vec<BTreeMap<usize, Complex64>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in per_row {
            for (c, v) in row {
                if v != ZERO {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { rows, cols, row_ptr, col_idx, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r).find(|&(j, _)| j == c).map(|(_, v)| v).unwrap_or(ZERO)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn triplets(&self) -> Vec<Triplet> {
        self.entries().map(|(row, col, v)| Triplet { row, col, re: v.re, im: v.im }).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_entries(self.cols, self.rows, self.entries().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    /// `α·self + β·other`.
    pub fn axpby(&self, alpha: Complex64, other: &CsrMatrix, beta: Complex64) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch in sparse sum");
        let per_row = (0..self.rows)
            .map(|r| {
                let mut m = BTreeMap::new();
                for (c, v) in self.row(r) {
                    *m.entry(c).or_insert(ZERO) += alpha * v;
                }
                for (c, v) in other.row(r) {
                    *m.entry(c).or_insert(ZERO) += beta * v;
                }
                m
            })
            .collect();
        Self::from_rows(self.rows, self.cols, per_row)
    }

    pub fn add(&self, other: &CsrMatrix) -> Self {
        self.axpby(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &CsrMatrix) -> Self {
        self.axpby(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch in sparse product");
        let per_row = (0..self.rows)
            .map(|r| {
                let mut m = BTreeMap::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        *m.entry(c).or_insert(ZERO) += a * b;
                    }
                }
                m
            })
            .collect();
        Self::from_rows(self.rows, other.cols, per_row)
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut d = DMatrix::from_element(self.rows, self.cols, ZERO);
        for (r, c, v) in self.entries() {
            d[(r, c)] = v;
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `sqrt(‖M P‖₁ ‖M P‖_∞)` where `P` keeps the columns with `keep(col)`;
    /// an upper bound on the spectral norm of the restriction.
    pub fn restricted_norm_bound(&self, keep: impl Fn(usize) -> bool) -> f64 {
        let mut col_sums = vec![0.0; self.cols];
        let mut row_max: f64 = 0.0;
        for r in 0..self.rows {
            let mut s = 0.0;
            for (c, v) in self.row(r) {
                if keep(c) {
                    let a = v.norm();
                    s += a;
                    col_sums[c] += a;
                }
            }
            row_max = row_max.max(s);
        }
        let col_max = col_sums.into_iter().fold(0.0, f64::max);
        (col_max * row_max).sqrt()
    }

    /// Largest `|M_ij − conj(M_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample() -> CsrMatrix {
        CsrMatrix::from_entries(3, 3, [(0, 1, c(1.0, 2.0)), (2, 0, c(-1.0, 0.0)), (1, 1, c(0.5, 0.0)), (0, 1, c(1.0, 0.0))])
    }

    #[test]
    fn dense_round_trip_and_products() {
        let a = sample();
        assert_eq!(a.get(0, 1), c(2.0, 2.0));
        assert_eq!(a.nnz(), 3);
        let b = a.adjoint();
        let d = a.to_dense() * b.to_dense();
        let s = a.matmul(&b).to_dense();
        assert!((d - s).iter().all(|z| z.norm() < 1e-15));
        let x = [c(1.0, 0.0), c(0.0, 1.0), c(2.0, -1.0)];
        let y = a.matvec(&x);
        let yd = a.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert_eq!(y[i], yd[i]);
        }
        assert_eq!(a.sub(&a).nnz(), 0);
        assert_eq!(a.matmul(&CsrMatrix::identity(3)), a);
    }

    #[test]
    fn restricted_norm_bounds_spectral_norm() {
        let a = sample();
        let full = a.restricted_norm_bound(|_| true);
        let svd = a.to_dense().singular_values();
        assert!(svd.max() <= full + 1e-14);
        assert_eq!(a.restricted_norm_bound(|_| false), 0.0);
    }
}

//! Compressed sparse column storage for the scaled constraint matrix.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct CscMatrix {
    nrows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CscMatrix {
    pub(crate) fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut col_ptr = Vec::with_capacity(a.ncols() + 1);
        let mut row_idx = Vec::new();
        let mut vals = Vec::new();
        col_ptr.push(0);
        for col in a.column_iter() {
            for (i, &v) in col.iter().enumerate() {
                if v != 0.0 {
                    row_idx.push(i);
                    vals.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self { nrows: a.nrows(), col_ptr, row_idx, vals }
    }

    fn ncols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    /// `out = A x`
    pub(crate) fn mul_to(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        out.fill(0.0);
        for j in 0..self.ncols() {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                out[self.row_idx[k]] += self.vals[k] * xj;
            }
        }
    }

    pub(crate) fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.nrows);
        self.mul_to(x, &mut out);
        out
    }

    /// `out = A' y`
    pub(crate) fn tr_mul_to(&self, y: &DVector<f64>, out: &mut DVector<f64>) {
        for j in 0..self.ncols() {
            let mut s = 0.0;
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                s += self.vals[k] * y[self.row_idx[k]];
            }
            out[j] = s;
        }
    }

    pub(crate) fn tr_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols());
        self.tr_mul_to(y, &mut out);
        out
    }

    /// `k += A' diag(w) A`
    pub(crate) fn add_weighted_gram(&self, w: &DVector<f64>, k: &mut DMatrix<f64>) {
        // row-major view of the nonzeros
        let mut rows: Vec<Vec<(usize, f64)>> = alloc::vec![Vec::new(); self.nrows];
        for j in 0..self.ncols() {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                rows[self.row_idx[p]].push((j, self.vals[p]));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            let wi = w[i];
            for &(a, va) in row {
                let s = wi * va;
                for &(b, vb) in row {
                    k[(a, b)] += s * vb;
                }
            }
        }
    }
}

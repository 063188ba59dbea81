//! Sparse feature vectors and per-example feature blocks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sparse vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVec {
    /// Builds a vector from `(index, value)` pairs. Zero values are dropped.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("sparse vector dimension must be positive"));
        }
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (idx, val) in entries {
            if idx >= dim {
                return Err(Error::invalid(format!(
                    "index {idx} out of range for dimension {dim}"
                )));
            }
            if !val.is_finite() {
                return Err(Error::invalid(format!("non-finite value at index {idx}")));
            }
            if let Some(&last) = indices.last() {
                if idx <= last {
                    return Err(Error::invalid(format!(
                        "indices not strictly increasing ({last} then {idx})"
                    )));
                }
            }
            if val != 0.0 {
                indices.push(idx);
                values.push(val);
            }
        }
        Ok(SparseVec {
            dim,
            indices,
            values,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "sparse vector dimension must be positive");
        SparseVec {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(dense: &[f64]) -> Result<Self> {
        Self::new(dense.len(), dense.iter().copied().enumerate())
    }

    /// `value * e_index`.
    pub fn unit(dim: usize, index: usize, value: f64) -> Result<Self> {
        Self::new(dim, [(index, value)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        debug_assert_eq!(dense.len(), self.dim);
        self.iter().map(|(j, x)| x * dense[j]).sum()
    }

    /// `dense += scale * self`
    pub fn axpy_into(&self, scale: f64, dense: &mut [f64]) {
        debug_assert_eq!(dense.len(), self.dim);
        for (j, x) in self.iter() {
            dense[j] += scale * x;
        }
    }

    pub fn sparse_dot(&self, other: &SparseVec) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    /// `a * self + b * other`, dropping exact zeros.
    pub fn linear_combination(&self, a: f64, other: &SparseVec, b: f64) -> SparseVec {
        debug_assert_eq!(self.dim, other.dim);
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        let (mut p, mut q) = (0, 0);
        let mut push = |j: usize, v: f64| {
            if v != 0.0 {
                indices.push(j);
                values.push(v);
            }
        };
        while p < self.nnz() || q < other.nnz() {
            let next_self = self.indices.get(p).copied().unwrap_or(usize::MAX);
            let next_other = other.indices.get(q).copied().unwrap_or(usize::MAX);
            if next_self < next_other {
                push(next_self, a * self.values[p]);
                p += 1;
            } else if next_other < next_self {
                push(next_other, b * other.values[q]);
                q += 1;
            } else {
                push(next_self, a * self.values[p] + b * other.values[q]);
                p += 1;
                q += 1;
            }
        }
        SparseVec {
            dim: self.dim,
            indices,
            values,
        }
    }

    pub fn norm2_sq(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.norm2_sq().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, x) in self.iter() {
            out[j] = x;
        }
        out
    }
}

/// The `d x k` feature matrix of one example, stored as `k` sparse columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleBlock {
    columns: Vec<SparseVec>,
}

impl ExampleBlock {
    pub fn new(columns: Vec<SparseVec>) -> Result<Self> {
        let Some(first) = columns.first() else {
            return Err(Error::invalid("an example block needs at least one column"));
        };
        let dim = first.dim();
        if columns.iter().any(|c| c.dim() != dim) {
            return Err(Error::invalid("example block columns differ in dimension"));
        }
        Ok(ExampleBlock { columns })
    }

    pub fn single(column: SparseVec) -> Self {
        ExampleBlock {
            columns: vec![column],
        }
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn dim(&self) -> usize {
        self.columns[0].dim()
    }

    pub fn columns(&self) -> &[SparseVec] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &SparseVec {
        &self.columns[j]
    }

    /// `X^T w`, one score per column.
    pub fn scores(&self, w: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| c.dot(w)).collect()
    }

    /// `dense += scale * X coeffs`
    pub fn apply_into(&self, coeffs: &[f64], scale: f64, dense: &mut [f64]) {
        for (col, &c) in self.columns.iter().zip(coeffs) {
            if c != 0.0 {
                col.axpy_into(scale * c, dense);
            }
        }
    }

    /// `X coeffs` as a sparse vector.
    pub fn combine(&self, coeffs: &[f64]) -> SparseVec {
        debug_assert_eq!(coeffs.len(), self.arity());
        let mut acc = SparseVec::zeros(self.dim());
        for (col, &c) in self.columns.iter().zip(coeffs) {
            if c != 0.0 {
                acc = acc.linear_combination(1.0, col, c);
            }
        }
        acc
    }
}

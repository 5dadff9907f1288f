use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaplacianVariant {
    /// `D - W`
    Combinatorial,
    /// `I - D^{-1/2} W D^{-1/2}`; isolated nodes get an all-zero row.
    Normalized,
}

/// Sparse symmetric Laplacian in CSR form, diagonal included.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    variant: LaplacianVariant,
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    lambda_max_bound: f64,
}

pub fn laplacian(g: &Graph, variant: LaplacianVariant) -> LaplacianMatrix {
    let n = g.n();
    let (adj_ptr, adj_cols, adj_w) = g.csr();
    let deg = g.degrees();
    let inv_sqrt: Vec<f64> = deg
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(adj_cols.len() + n);
    let mut vals = Vec::with_capacity(adj_cols.len() + n);
    row_ptr.push(0);
    for i in 0..n {
        let diag = match variant {
            LaplacianVariant::Combinatorial => deg[i],
            LaplacianVariant::Normalized => {
                if deg[i] > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        let mut diag_done = false;
        for p in adj_ptr[i]..adj_ptr[i + 1] {
            let j = adj_cols[p];
            if !diag_done && j > i {
                cols.push(i);
                vals.push(diag);
                diag_done = true;
            }
            let off = match variant {
                LaplacianVariant::Combinatorial => -adj_w[p],
                LaplacianVariant::Normalized => -adj_w[p] * inv_sqrt[i] * inv_sqrt[j],
            };
            cols.push(j);
            vals.push(off);
        }
        if !diag_done {
            cols.push(i);
            vals.push(diag);
        }
        row_ptr.push(cols.len());
    }

    let lambda_max_bound = match variant {
        LaplacianVariant::Combinatorial => 2.0 * g.max_degree(),
        LaplacianVariant::Normalized => 2.0,
    };
    LaplacianMatrix {
        variant,
        n,
        row_ptr,
        cols,
        vals,
        lambda_max_bound,
    }
}

impl LaplacianMatrix {
    pub fn variant(&self) -> LaplacianVariant {
        self.variant
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Upper bound on the largest eigenvalue.
    pub fn lambda_max_bound(&self) -> f64 {
        self.lambda_max_bound
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `y = L x`
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            *yi = self.cols[r.clone()]
                .iter()
                .zip(&self.vals[r])
                .map(|(&j, &v)| v * x[j])
                .sum();
        }
    }

    /// `Y = L X` for row-major `n x d` blocks, restricted to the output rows
    /// `first..first + y.len() / d`.
    pub(crate) fn spmm_rows(&self, x: &[f64], y: &mut [f64], d: usize, first: usize) {
        for (r, yi) in y.chunks_exact_mut(d).enumerate() {
            let i = first + r;
            yi.fill(0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let (j, v) = (self.cols[k], self.vals[k]);
                for (a, b) in yi.iter_mut().zip(&x[j * d..(j + 1) * d]) {
                    *a += v * b;
                }
            }
        }
    }

    /// Stored entries of row `i` as `(column, value)`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `x^T L x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }
}

//! Sparse undirected weighted graphs, their Laplacians, and the stochastic
//! block model used by the experiments.

mod io;
mod laplacian;
mod sbm;

pub use io::{read_edge_list, read_labels, write_edge_list, write_labels};
pub use laplacian::{laplacian, LaplacianMatrix, LaplacianVariant};
pub use sbm::{perturb_edges, perturb_nodes, sbm_generate, SbmParams};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// An immutable simple undirected graph with positive edge weights.
///
/// Edges are stored once in canonical orientation (`i < j`, sorted), and the
/// symmetric adjacency is materialized in compressed sparse row form so both
/// orientations are visited when iterating neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
}

impl Graph {
    /// Builds a graph from undirected edges given in either orientation.
    ///
    /// Rejects self-loops, out-of-range endpoints, non-positive or
    /// non-finite weights, and repeated node pairs.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut canon = Vec::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(invalid(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            if a == b {
                return Err(invalid(format!("self-loop on node {a}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(invalid(format!("edge ({a}, {b}) has non-positive weight {w}")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            canon.push(Edge { i, j, w });
        }
        canon.sort_by(|x, y| (x.i, x.j).cmp(&(y.i, y.j)));
        if let Some(dup) = canon.windows(2).find(|p| (p[0].i, p[0].j) == (p[1].i, p[1].j)) {
            return Err(invalid(format!("duplicate edge ({}, {})", dup[0].i, dup[0].j)));
        }
        Ok(Self::from_canonical(n, canon))
    }

    /// `edges` must already be canonical, sorted and duplicate-free.
    pub(crate) fn from_canonical(n: usize, edges: Vec<Edge>) -> Self {
        let mut counts = vec![0usize; n + 1];
        for e in &edges {
            counts[e.i + 1] += 1;
            counts[e.j + 1] += 1;
        }
        for v in 0..n {
            counts[v + 1] += counts[v];
        }
        let row_ptr = counts;
        let nnz = row_ptr[n];
        let mut cols = vec![0usize; nnz];
        let mut weights = vec![0.0; nnz];
        let mut fill = row_ptr.clone();
        // Canonical sorted order fills each row with ascending columns: lower
        // neighbours arrive through `e.j` rows before upper ones through `e.i`.
        for e in &edges {
            cols[fill[e.j]] = e.i;
            weights[fill[e.j]] = e.w;
            fill[e.j] += 1;
        }
        for e in &edges {
            cols[fill[e.i]] = e.j;
            weights[fill[e.i]] = e.w;
            fill[e.i] += 1;
        }
        let degrees = (0..n)
            .map(|v| weights[row_ptr[v]..row_ptr[v + 1]].iter().sum())
            .collect();
        Graph {
            n,
            edges,
            row_ptr,
            cols,
            weights,
            degrees,
        }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_canonical(n, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edges, `i < j`, sorted lexicographically.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[v]..self.row_ptr[v + 1];
        self.cols[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    pub fn degree(&self, v: usize) -> f64 {
        self.degrees[v]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            2.0 * self.edges.len() as f64 / self.n as f64
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let r = self.row_ptr[a]..self.row_ptr[a + 1];
        self.cols[r].binary_search(&b).is_ok()
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        let start = self.row_ptr[a];
        let r = start..self.row_ptr[a + 1];
        self.cols[r].binary_search(&b).ok().map(|off| self.weights[start + off])
    }

    pub(crate) fn csr(&self) -> (&[usize], &[usize], &[f64]) {
        (&self.row_ptr, &self.cols, &self.weights)
    }

    /// Component id per node, numbered in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let mut uf = UnionFind::new(self.n);
        for e in &self.edges {
            uf.union(e.i, e.j);
        }
        let mut ids = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut out = Vec::with_capacity(self.n);
        for v in 0..self.n {
            let r = uf.find(v);
            if ids[r] == usize::MAX {
                ids[r] = next;
                next += 1;
            }
            out.push(ids[r]);
        }
        out
    }

    pub fn component_count(&self) -> usize {
        self.components().iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Dense symmetric adjacency matrix. Intended for small test oracles.
    pub fn dense_adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            a[(e.i, e.j)] = e.w;
            a[(e.j, e.i)] = e.w;
        }
        a
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Cluster ids for every node, all in `[0, k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    k: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(invalid(format!("label {l} at node {i} is not below k = {k}")));
        }
        Ok(LabelVector { labels, k })
    }

    /// Contiguous blocks of near-equal size; the first `n mod k` blocks get
    /// one extra node.
    pub fn balanced(n: usize, k: usize) -> Self {
        let base = n / k;
        let extra = n % k;
        let mut labels = Vec::with_capacity(n);
        for c in 0..k {
            let size = base + usize::from(c < extra);
            labels.extend(std::iter::repeat_n(c, size));
        }
        LabelVector { labels, k }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn get(&self, v: usize) -> usize {
        self.labels[v]
    }

    pub(crate) fn set(&mut self, v: usize, label: usize) {
        debug_assert!(label < self.k);
        self.labels[v] = label;
    }
}

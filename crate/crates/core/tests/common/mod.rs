#![allow(dead_code)]

use dcsc::graph::{laplacian, sbm_generate, Graph, LabelVector, LaplacianMatrix, LaplacianVariant, SbmParams};
use nalgebra::DMatrix;

pub fn sbm(n: usize, k: usize, s: f64, e: f64, seed: u64) -> (Graph, LabelVector, SbmParams) {
    let params = SbmParams::new(n, k, s, e).unwrap();
    let (g, labels) = sbm_generate(&params, seed);
    (g, labels, params)
}

pub fn normalized(g: &Graph) -> LaplacianMatrix {
    laplacian(g, LaplacianVariant::Normalized)
}

/// Every partition of `0..n` into exactly `k` non-empty blocks, as
/// restricted growth strings.
pub fn partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, used: usize, n: usize, k: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            if used == k {
                out.push(prefix.clone());
            }
            return;
        }
        let remaining = n - prefix.len();
        if used + remaining < k {
            return;
        }
        for label in 0..=used.min(k - 1) {
            prefix.push(label);
            grow(prefix, used.max(label + 1), n, k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::with_capacity(n), 0, n, k, &mut out);
    out
}

/// `sqrt` of the summed squared distances of rows to their cluster means.
pub fn sse_cost(f: &DMatrix<f64>, labels: &[usize], k: usize) -> f64 {
    let d = f.ncols();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for c in 0..d {
            sums[l][c] += f[(i, c)];
        }
    }
    let mut total = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        for c in 0..d {
            let mean = sums[l][c] / counts[l] as f64;
            total += (f[(i, c)] - mean).powi(2);
        }
    }
    total.sqrt()
}

/// Global k-means optimum by enumeration.
pub fn exhaustive_kmeans(f: &DMatrix<f64>, k: usize) -> (f64, Vec<usize>) {
    partitions(f.nrows(), k)
        .into_iter()
        .map(|p| (sse_cost(f, &p, k), p))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
}

pub fn dense_projector(u: &DMatrix<f64>) -> DMatrix<f64> {
    u * u.transpose()
}

/// `h(L)` through the dense eigendecomposition of `L`.
pub fn dense_filter(l: &LaplacianMatrix, h: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = l.to_dense().symmetric_eigen();
    let hl = DMatrix::from_diagonal(&eig.eigenvalues.map(h));
    &eig.eigenvectors * hl * eig.eigenvectors.transpose()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

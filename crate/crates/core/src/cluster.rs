//! k-means on the rows of a feature matrix, and the Frobenius-form cost
//! `||F - X X^T F||_F` where `X` is the normalized indicator matrix of an
//! assignment. The cost is the square root of the usual sum of squared
//! distances to cluster means.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng;
use crate::spectral::SpectralBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KmeansInit {
    #[default]
    Kmeanspp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KmeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Relative improvement of the squared cost below which Lloyd stops.
    pub tol: f64,
    pub init: KmeansInit,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        KmeansConfig {
            restarts: 10,
            max_iters: 100,
            tol: 1e-6,
            init: KmeansInit::Kmeanspp,
        }
    }
}

/// A partition of the `n` rows into `k` non-empty clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub labels: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    /// k-means cost on the features the assignment was computed from.
    pub feature_cost: f64,
}

impl Assignment {
    /// Wraps an explicit labelling, measuring its cost on `features`.
    /// Every cluster must be non-empty.
    pub fn from_labels(features: &DMatrix<f64>, labels: Vec<usize>, k: usize) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(invalid(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.nrows()
            )));
        }
        let sizes = cluster_sizes(&labels, k)?;
        if let Some(c) = sizes.iter().position(|&s| s == 0) {
            return Err(invalid(format!("cluster {c} is empty")));
        }
        let mut a = Assignment {
            labels,
            cluster_sizes: sizes,
            feature_cost: 0.0,
        };
        a.feature_cost = kmeans_cost(features, &a);
        Ok(a)
    }

    pub fn k(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// The `n x k` indicator matrix with `1/sqrt(s_j)` on member rows.
    pub fn indicator_matrix(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.n(), self.k());
        for (i, &l) in self.labels.iter().enumerate() {
            x[(i, l)] = 1.0 / (self.cluster_sizes[l] as f64).sqrt();
        }
        x
    }
}

fn cluster_sizes(labels: &[usize], k: usize) -> Result<Vec<usize>> {
    let mut sizes = vec![0; k];
    for &l in labels {
        if l >= k {
            return Err(invalid(format!("label {l} not below k = {k}")));
        }
        sizes[l] += 1;
    }
    Ok(sizes)
}

/// `||F - X X^T F||_F`, evaluated through cluster means.
pub fn kmeans_cost(features: &DMatrix<f64>, a: &Assignment) -> f64 {
    let (n, d) = features.shape();
    let k = a.k();
    let mut sums = vec![0.0; k * d];
    for c in 0..d {
        let col = features.column(c);
        for i in 0..n {
            sums[a.labels[i] * d + c] += col[i];
        }
    }
    let mut sse = 0.0;
    for c in 0..d {
        let col = features.column(c);
        for i in 0..n {
            let l = a.labels[i];
            let diff = col[i] - sums[l * d + c] / a.cluster_sizes[l] as f64;
            sse += diff * diff;
        }
    }
    sse.sqrt()
}

/// Cost of `a` measured on the exact spectral features `U_k`.
pub fn evaluate_on_basis(basis: &SpectralBasis, a: &Assignment) -> Result<f64> {
    if basis.vectors.nrows() != a.n() {
        return Err(crate::Error::ShapeMismatch(format!(
            "basis has {} rows, assignment {}",
            basis.vectors.nrows(),
            a.n()
        )));
    }
    Ok(kmeans_cost(&basis.vectors, a))
}

/// Best of `cfg.restarts` Lloyd runs from k-means++ seeds.
pub fn kmeans(features: &DMatrix<f64>, k: usize, cfg: &KmeansConfig, seed: u64) -> Result<Assignment> {
    Ok(kmeans_runs(features, k, cfg, seed)?.0)
}

/// Like [`kmeans`], also returning the squared-cost history of every restart.
pub fn kmeans_with_history(
    features: &DMatrix<f64>,
    k: usize,
    cfg: &KmeansConfig,
    seed: u64,
) -> Result<(Assignment, Vec<Vec<f64>>)> {
    kmeans_runs(features, k, cfg, seed)
}

fn kmeans_runs(
    features: &DMatrix<f64>,
    k: usize,
    cfg: &KmeansConfig,
    seed: u64,
) -> Result<(Assignment, Vec<Vec<f64>>)> {
    let n = features.nrows();
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if k > n {
        return Err(invalid(format!("k = {k} exceeds the number of points n = {n}")));
    }
    if cfg.restarts == 0 {
        return Err(invalid("kmeans needs at least one restart"));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(invalid("features contain non-finite entries"));
    }
    let points = Points::from_matrix(features);
    let seed = rng::derive(seed, rng::labels::KMEANS);

    let runs: Vec<Run> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| lloyd(&points, k, cfg, rng::stream_rng(seed, r as u64)))
        .collect();
    // Ties broken by restart index, which `min_by` preserves.
    let best = runs
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.sse.total_cmp(&b.sse))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let histories = runs.iter().map(|r| r.history.clone()).collect();
    let run = &runs[best];
    let cluster_sizes = cluster_sizes(&run.labels, k)?;
    debug_assert!(cluster_sizes.iter().all(|&s| s > 0));
    Ok((
        Assignment {
            labels: run.labels.clone(),
            cluster_sizes,
            feature_cost: run.sse.sqrt(),
        },
        histories,
    ))
}

/// Row-major copy of the feature rows.
struct Points {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Points {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (n, d) = m.shape();
        let mut data = vec![0.0; n * d];
        for c in 0..d {
            for (i, v) in m.column(c).iter().enumerate() {
                data[i * d + c] = *v;
            }
        }
        Points { n, d, data }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Run {
    labels: Vec<usize>,
    sse: f64,
    history: Vec<f64>,
}

fn seed_plus_plus<R: Rng>(p: &Points, k: usize, rng: &mut R) -> Vec<f64> {
    let d = p.d;
    let mut centroids = Vec::with_capacity(k * d);
    let first = rng.random_range(0..p.n);
    centroids.extend_from_slice(p.row(first));
    let mut best: Vec<f64> = (0..p.n).map(|i| dist2(p.row(i), p.row(first))).collect();
    for _ in 1..k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = p.n - 1;
            for (i, &w) in best.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..p.n)
        };
        let c = p.row(pick).to_vec();
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(dist2(p.row(i), &c));
        }
        centroids.extend_from_slice(&c);
    }
    centroids
}

fn lloyd<R: Rng>(p: &Points, k: usize, cfg: &KmeansConfig, mut rng: R) -> Run {
    let (n, d) = (p.n, p.d);
    let mut centroids = seed_plus_plus(p, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let mut prev = f64::INFINITY;

    for _ in 0..cfg.max_iters.max(1) {
        for i in 0..n {
            let row = p.row(i);
            let (mut bl, mut bd) = (0, f64::INFINITY);
            for c in 0..k {
                let dd = dist2(row, &centroids[c * d..(c + 1) * d]);
                if dd < bd {
                    bd = dd;
                    bl = c;
                }
            }
            labels[i] = bl;
            dists[i] = bd;
        }

        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        // Empty clusters take the point farthest from its centroid.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .expect("n >= k guarantees a donor cluster");
            counts[labels[far]] -= 1;
            labels[far] = c;
            counts[c] = 1;
            dists[far] = 0.0;
        }

        centroids.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let l = labels[i];
            for (acc, v) in centroids[l * d..(l + 1) * d].iter_mut().zip(p.row(i)) {
                *acc += v;
            }
        }
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            centroids[c * d..(c + 1) * d].iter_mut().for_each(|v| *v *= inv);
        }

        let sse: f64 = (0..n)
            .map(|i| dist2(p.row(i), &centroids[labels[i] * d..(labels[i] + 1) * d]))
            .sum();
        history.push(sse);
        let converged = prev.is_finite() && prev - sse <= cfg.tol * prev;
        prev = sse;
        if converged {
            break;
        }
    }
    Run {
        labels,
        sse: prev,
        history,
    }
}

/// Adjusted Rand index between two labellings of the same nodes.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().copied().max().map_or(0, |m| m + 1);
    let kb = b.iter().copied().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
    }
    let c2 = |v: u64| (v * v.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().map(|&v| c2(v)).sum();
    let sum_rows: f64 = (0..ka).map(|i| c2(table[i * kb..(i + 1) * kb].iter().sum())).sum();
    let sum_cols: f64 = (0..kb).map(|j| c2((0..ka).map(|i| table[i * kb + j]).sum())).sum();
    let total = c2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        return 1.0;
    }
    (sum_cells - expected) / (max - expected)
}

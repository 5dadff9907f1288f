//! Static compressive spectral clustering: Gaussian signals filtered by a
//! low-pass Chebyshev filter replace the Laplacian eigenvectors as k-means
//! features.

use std::ops::Range;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, Assignment, KmeansConfig};
use crate::error::{invalid, Error, Result};
use crate::filter::{bisect_cutoff, cold_interval, EigencountConfig, FilterConfig, FilterPoly, MatvecCounter};
use crate::graph::LaplacianMatrix;
use crate::rng;

/// Where a feature column came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnTag {
    /// Graph step the column was filtered on.
    pub step: usize,
    /// RNG stream of the raw signal.
    pub stream: u64,
}

/// `n x d` filtered signals; rows are node features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    provenance: Vec<ColumnTag>,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, provenance: Vec<ColumnTag>) -> Result<Self> {
        if provenance.len() != values.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{} provenance tags for {} columns",
                provenance.len(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("feature matrix has non-finite entries"));
        }
        Ok(FeatureMatrix { values, provenance })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn provenance(&self) -> &[ColumnTag] {
        &self.provenance
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    /// Concatenates columns, `self` first.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.n() != other.n() {
            return Err(Error::ShapeMismatch(format!("{} vs {} rows", self.n(), other.n())));
        }
        let n = self.n();
        let data = self.values.as_slice().iter().chain(other.values.as_slice()).copied();
        let values = DMatrix::from_iterator(n, self.d() + other.d(), data);
        let mut provenance = self.provenance.clone();
        provenance.extend_from_slice(&other.provenance);
        Ok(FeatureMatrix { values, provenance })
    }

    /// The listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select_columns(cols),
            provenance: cols.iter().map(|&c| self.provenance[c]).collect(),
        }
    }
}

/// Gaussian columns of variance `1/variance_d`; column `c` of the block is
/// drawn from stream `streams.start + c` of `seed` alone.
pub(crate) fn signal_block(n: usize, streams: Range<u64>, variance_d: usize, seed: u64) -> DMatrix<f64> {
    let normal = Normal::new(0.0, (1.0 / variance_d as f64).sqrt()).expect("positive std");
    let seed = rng::derive(seed, rng::labels::SIGNALS);
    let cols = (streams.end - streams.start) as usize;
    let mut data = Vec::with_capacity(n * cols);
    for s in streams {
        let mut r = rng::stream_rng(seed, s);
        data.extend((0..n).map(|_| normal.sample(&mut r)));
    }
    DMatrix::from_vec(n, cols, data)
}

/// `n x d` i.i.d. centered Gaussian entries of variance `1/d`.
pub fn random_signals(n: usize, d: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(invalid("need at least one signal"));
    }
    Ok(signal_block(n, 0..d as u64, d, seed))
}

/// Every knob of the static pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CscConfig {
    pub filter: FilterConfig,
    pub eigencount: EigencountConfig,
    pub kmeans: KmeansConfig,
    /// Deviation parameter used only to report the cost bound.
    pub t: f64,
}

impl Default for CscConfig {
    fn default() -> Self {
        CscConfig {
            filter: FilterConfig::default(),
            eigencount: EigencountConfig::default(),
            kmeans: KmeansConfig::default(),
            t: 2.0,
        }
    }
}

impl CscConfig {
    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }
}

/// Filtered features together with the filter that produced them.
#[derive(Debug, Clone)]
pub struct CscFeatures {
    pub features: FeatureMatrix,
    pub lambda_k: f64,
    pub filter: FilterPoly,
    pub dichotomy_iters: usize,
    /// Raw Gaussian signals before filtering.
    pub signals: DMatrix<f64>,
}

/// Runs the cold cut-off dichotomy and keeps the accepted filtered signals.
pub fn csc_features(
    l: &LaplacianMatrix,
    k: usize,
    d: usize,
    cfg: &CscConfig,
    seed: u64,
    counter: &MatvecCounter,
) -> Result<CscFeatures> {
    if k == 0 || k >= l.n() {
        return Err(invalid(format!("need 1 <= k < n, got k = {k}, n = {}", l.n())));
    }
    let signals = random_signals(l.n(), d, seed)?;
    let found = bisect_cutoff(l, k, &signals, d, &cfg.filter, &cfg.eigencount, cold_interval(l), counter)?;
    let tags = (0..d as u64).map(|s| ColumnTag { step: 1, stream: s }).collect();
    Ok(CscFeatures {
        features: FeatureMatrix::new(found.filtered, tags)?,
        lambda_k: found.lambda_k,
        filter: found.poly,
        dichotomy_iters: found.iters,
        signals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CscDiagnostics {
    pub lambda_k: f64,
    pub dichotomy_iters: usize,
    pub matvecs: u64,
    pub d: usize,
    /// `d < k`: the features cannot span the spectral subspace.
    pub undersampled: bool,
    /// `2 sqrt(k/d) (sqrt(k) + t)`, the additive cost bound at the reported `t`.
    pub cost_bound: f64,
    pub wall_ms: f64,
}

/// `2 sqrt(k/d) (sqrt(k) + t)`
pub fn static_cost_bound(k: usize, d: usize, t: f64) -> f64 {
    let (k, d) = (k as f64, d as f64);
    2.0 * (k / d).sqrt() * (k.sqrt() + t)
}

/// k-means on the rows of the filtered features.
pub fn csc_assign(
    l: &LaplacianMatrix,
    k: usize,
    d: usize,
    cfg: &CscConfig,
    seed: u64,
) -> Result<(Assignment, CscDiagnostics)> {
    let (a, diag, _) = csc_run(l, k, d, cfg, seed, &MatvecCounter::new())?;
    Ok((a, diag))
}

pub(crate) fn csc_run(
    l: &LaplacianMatrix,
    k: usize,
    d: usize,
    cfg: &CscConfig,
    seed: u64,
    counter: &MatvecCounter,
) -> Result<(Assignment, CscDiagnostics, CscFeatures)> {
    let start = Instant::now();
    let before = counter.get();
    let feats = csc_features(l, k, d, cfg, seed, counter)?;
    let a = kmeans(feats.features.values(), k, &cfg.kmeans, seed)?;
    let diag = CscDiagnostics {
        lambda_k: feats.lambda_k,
        dichotomy_iters: feats.dichotomy_iters,
        matvecs: counter.get() - before,
        d,
        undersampled: d < k,
        cost_bound: static_cost_bound(k, d, cfg.t),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((a, diag, feats))
}

/// The unitary alignment between `U_k^T R` and the truncated identity.
///
/// With the SVD `R' = Q_L S Q_R^T` (`R'` is `k x d`, `k <= d`), returns
/// `Q = diag(Q_L, I_{d-k}) Q_R^T` and the singular values `S`, for which
/// `||R' - I_{k x d} Q||_F = ||S - I_{k x d}||_F`.
pub fn alignment_q(r_prime: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (k, d) = r_prime.shape();
    if k == 0 || k > d {
        return Err(invalid(format!("alignment needs 1 <= k <= d, got k = {k}, d = {d}")));
    }
    let svd = r_prime.clone().svd(true, true);
    let q_l = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();

    let q_r = complete_basis(&v_t.transpose());
    let mut block = DMatrix::identity(d, d);
    block.view_mut((0, 0), (k, k)).copy_from(&q_l);
    Ok((block * q_r.transpose(), sigma))
}

/// Extends orthonormal columns to a full orthonormal basis of `R^rows`,
/// keeping the given columns first.
fn complete_basis(cols: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cols.nrows();
    let mut basis: Vec<DVector<f64>> = cols.column_iter().map(|c| c.into_owned()).collect();
    let residual = |basis: &[DVector<f64>], i: usize| {
        let mut r = DVector::zeros(d);
        r[i] = 1.0;
        for _ in 0..2 {
            for q in basis {
                let proj = q.dot(&r);
                r.axpy(-proj, q, 1.0);
            }
        }
        r
    };
    while basis.len() < d {
        let r = (0..d)
            .map(|i| residual(&basis, i))
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .expect("d >= 1");
        basis.push(r.normalize());
    }
    DMatrix::from_columns(&basis)
}

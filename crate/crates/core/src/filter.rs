//! Chebyshev approximation of the ideal low-pass response and its
//! application to blocks of graph signals.
//!
//! A filter of order `m` is `h(lambda) = sum_j c_j T_j(x)` with
//! `x = 1 - 2 lambda / lambda_max`, so `[0, lambda_max]` maps onto `[1, -1]`
//! and the pass band sits at the top of the Chebyshev interval. `c_0` is not
//! halved: the constant filter `h = 1` is `c = [1]`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csc::{signal_block, ColumnTag, FeatureMatrix};
use crate::error::{invalid, Error, Result};
use crate::graph::LaplacianMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Damping {
    None,
    #[default]
    Jackson,
}

/// Target response approximated by the polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Response {
    /// `1{lambda <= lambda_c}`
    #[default]
    Step,
    /// `1 / (1 + exp(steepness (lambda - lambda_c) / lambda_max))`
    Sigmoid { steepness: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub order: usize,
    pub damping: Damping,
    pub response: Response,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            order: 100,
            damping: Damping::Jackson,
            response: Response::Step,
        }
    }
}

/// Acceptance rule for the cut-off dichotomy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigencountConfig {
    /// Relative tolerance: an eigencount within `k (1 +- tol)` is accepted.
    pub tol: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub interval_tol: f64,
    pub max_iters: usize,
}

impl Default for EigencountConfig {
    fn default() -> Self {
        EigencountConfig {
            tol: 0.1,
            interval_tol: 1e-3,
            max_iters: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterPoly {
    pub coefficients: Vec<f64>,
    pub lambda_c: f64,
    pub lambda_max: f64,
    pub damping: Damping,
}

impl FilterPoly {
    /// A polynomial given directly by its (already damped) coefficients.
    pub fn from_coefficients(coefficients: Vec<f64>, lambda_max: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(invalid("a filter needs at least one coefficient"));
        }
        if !(lambda_max.is_finite() && lambda_max > 0.0) {
            return Err(invalid(format!("lambda_max = {lambda_max} must be positive")));
        }
        Ok(FilterPoly {
            coefficients,
            lambda_c: f64::NAN,
            lambda_max,
            damping: Damping::None,
        })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    fn to_unit(&self, lambda: f64) -> f64 {
        1.0 - 2.0 * lambda / self.lambda_max
    }

    /// `h(lambda)` by Clenshaw's recurrence.
    pub fn eval(&self, lambda: f64) -> f64 {
        let x = self.to_unit(lambda);
        let c = &self.coefficients;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &cj in c[1..].iter().rev() {
            let b0 = cj + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        c[0] + x * b1 - b2
    }
}

/// Jackson damping factors `g_0 .. g_m`.
pub fn jackson_factors(m: usize) -> Vec<f64> {
    let mp2 = (m + 2) as f64;
    let a = PI / mp2;
    (0..=m)
        .map(|j| {
            let jf = j as f64;
            ((1.0 - jf / mp2) * a.sin() * (jf * a).cos() + (a.cos() * (jf * a).sin()) / mp2) / a.sin()
        })
        .collect()
}

/// Order-`m` Chebyshev approximation of `1{lambda <= lambda_c}` on
/// `[0, lambda_max]`. Cut-offs outside the interval give the all-pass or
/// all-stop filter.
pub fn cheb_coeffs(lambda_c: f64, lambda_max: f64, m: usize, damping: Damping) -> Result<FilterPoly> {
    cheb_coeffs_for(Response::Step, lambda_c, lambda_max, m, damping)
}

pub fn cheb_coeffs_for(
    response: Response,
    lambda_c: f64,
    lambda_max: f64,
    m: usize,
    damping: Damping,
) -> Result<FilterPoly> {
    if !(lambda_max.is_finite() && lambda_max > 0.0) {
        return Err(invalid(format!("lambda_max = {lambda_max} must be positive")));
    }
    if !lambda_c.is_finite() {
        return Err(invalid("cut-off must be finite"));
    }
    if m == 0 {
        return Err(invalid("filter order must be at least 1"));
    }
    let mut coefficients = match response {
        Response::Step => {
            // In theta (x = cos theta) the pass band is [0, theta_c].
            let xc = (1.0 - 2.0 * lambda_c / lambda_max).clamp(-1.0, 1.0);
            let theta_c = xc.acos();
            let mut c = Vec::with_capacity(m + 1);
            c.push(theta_c / PI);
            for j in 1..=m {
                let jf = j as f64;
                c.push(2.0 * (jf * theta_c).sin() / (jf * PI));
            }
            c
        }
        Response::Sigmoid { steepness } => {
            let f = |lambda: f64| 1.0 / (1.0 + (steepness * (lambda - lambda_c) / lambda_max).exp());
            gauss_chebyshev_coeffs(f, lambda_max, m)
        }
    };
    if damping == Damping::Jackson {
        for (c, g) in coefficients.iter_mut().zip(jackson_factors(m)) {
            *c *= g;
        }
    }
    Ok(FilterPoly {
        coefficients,
        lambda_c,
        lambda_max,
        damping,
    })
}

fn gauss_chebyshev_coeffs(f: impl Fn(f64) -> f64, lambda_max: f64, m: usize) -> Vec<f64> {
    let nodes = (4 * (m + 1)).max(1024);
    let samples: Vec<(f64, f64)> = (0..nodes)
        .map(|i| {
            let theta = PI * (i as f64 + 0.5) / nodes as f64;
            let lambda = lambda_max * (1.0 - theta.cos()) / 2.0;
            (theta, f(lambda))
        })
        .collect();
    (0..=m)
        .map(|j| {
            let s: f64 = samples.iter().map(|(t, v)| v * (j as f64 * t).cos()).sum();
            let scale = if j == 0 { 1.0 } else { 2.0 };
            scale * s / nodes as f64
        })
        .collect()
}

/// Cumulative number of sparse matrix-vector products.
#[derive(Debug, Default)]
pub struct MatvecCounter(AtomicU64);

impl MatvecCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

impl Clone for MatvecCounter {
    fn clone(&self) -> Self {
        MatvecCounter(AtomicU64::new(self.get()))
    }
}

/// `h(L) X` through the three-term recurrence on the whole block.
/// Charges exactly `order` matvecs per column.
pub fn apply_filter(
    l: &LaplacianMatrix,
    poly: &FilterPoly,
    x: &DMatrix<f64>,
    counter: &MatvecCounter,
) -> Result<DMatrix<f64>> {
    let n = l.n();
    if x.nrows() != n {
        return Err(Error::ShapeMismatch(format!(
            "signal block has {} rows, Laplacian {}",
            x.nrows(),
            n
        )));
    }
    let d = x.ncols();
    if d == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    // Row-major copies, so each sparse row update is a contiguous axpy.
    let xt = x.transpose();
    let out = filter_block(l, poly, xt.as_slice(), d);
    counter.add((poly.order() * d) as u64);
    Ok(DMatrix::from_column_slice(d, n, &out).transpose())
}

const ROWS_PER_TASK: usize = 64;

fn filter_block(l: &LaplacianMatrix, poly: &FilterPoly, x: &[f64], d: usize) -> Vec<f64> {
    let c = &poly.coefficients;
    let scale = 2.0 / poly.lambda_max;
    let mut out: Vec<f64> = x.iter().map(|v| c[0] * v).collect();
    if c.len() == 1 {
        return out;
    }
    let chunk = ROWS_PER_TASK * d;
    let mut lv = vec![0.0; x.len()];
    let matvec = |src: &[f64], dst: &mut [f64]| {
        dst.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(b, y)| l.spmm_rows(src, y, d, b * ROWS_PER_TASK));
    };
    // M v = v - (2 / lambda_max) L v
    let mut prev = x.to_vec();
    matvec(&prev, &mut lv);
    let mut cur: Vec<f64> = prev.iter().zip(&lv).map(|(v, w)| v - scale * w).collect();
    for (o, t) in out.iter_mut().zip(&cur) {
        *o += c[1] * t;
    }
    for &cj in &c[2..] {
        matvec(&cur, &mut lv);
        (out.par_chunks_mut(chunk), prev.par_chunks_mut(chunk), cur.par_chunks_mut(chunk), lv.par_chunks(chunk))
            .into_par_iter()
            .for_each(|(o, p, q, w)| {
                for i in 0..o.len() {
                    let next = 2.0 * (q[i] - scale * w[i]) - p[i];
                    p[i] = q[i];
                    q[i] = next;
                    o[i] += cj * next;
                }
            });
    }
    out
}

/// `||h(L) R||_F^2` for signals of variance `1/variance_d`, rescaled as if
/// `variance_d` columns had been filtered.
pub(crate) fn count_estimate(filtered: &DMatrix<f64>, variance_d: usize) -> f64 {
    filtered.norm_squared() * variance_d as f64 / filtered.ncols() as f64
}

/// Randomized count of eigenvalues below `lambda_c`: filters `d` fresh
/// Gaussian signals and returns `||h(L) R||_F^2` with the filtered signals.
pub fn eigencount(
    l: &LaplacianMatrix,
    lambda_c: f64,
    d: usize,
    filter: &FilterConfig,
    seed: u64,
    counter: &MatvecCounter,
) -> Result<(f64, FeatureMatrix)> {
    if d == 0 {
        return Err(invalid("eigencount needs at least one signal"));
    }
    let signals = signal_block(l.n(), 0..d as u64, d, seed);
    let poly = cheb_coeffs_for(filter.response, lambda_c, l.lambda_max_bound(), filter.order, filter.damping)?;
    let y = apply_filter(l, &poly, &signals, counter)?;
    let estimate = count_estimate(&y, d);
    let tags = (0..d as u64).map(|s| ColumnTag { step: 0, stream: s }).collect();
    Ok((estimate, FeatureMatrix::new(y, tags)?))
}

/// Outcome of a cut-off dichotomy.
#[derive(Debug, Clone)]
pub struct CutoffSearch {
    pub lambda_k: f64,
    pub poly: FilterPoly,
    /// Filtered signals from the accepting iteration.
    pub filtered: DMatrix<f64>,
    pub estimate: f64,
    pub iters: usize,
    /// Whether the eigencount landed inside the tolerance band, as opposed to
    /// the bracket collapsing first.
    pub in_band: bool,
}

/// Bisection on the cut-off until the eigencount of `signals` matches `k`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn bisect_cutoff(
    l: &LaplacianMatrix,
    k: usize,
    signals: &DMatrix<f64>,
    variance_d: usize,
    filter: &FilterConfig,
    search: &EigencountConfig,
    interval: (f64, f64),
    counter: &MatvecCounter,
) -> Result<CutoffSearch> {
    let (mut lo, mut hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid(format!("bad search interval [{lo}, {hi}]")));
    }
    let target = k as f64;
    let (mut last_cut, mut last_est) = (f64::NAN, f64::NAN);
    for iter in 1..=search.max_iters {
        let mid = 0.5 * (lo + hi);
        let poly = cheb_coeffs_for(filter.response, mid, l.lambda_max_bound(), filter.order, filter.damping)?;
        let filtered = apply_filter(l, &poly, signals, counter)?;
        let estimate = count_estimate(&filtered, variance_d);
        let in_band = (estimate - target).abs() <= search.tol * target;
        if estimate > target {
            hi = mid;
        } else {
            lo = mid;
        }
        if in_band || hi - lo < search.interval_tol {
            return Ok(CutoffSearch {
                lambda_k: mid,
                poly,
                filtered,
                estimate,
                iters: iter,
                in_band,
            });
        }
        last_cut = mid;
        last_est = estimate;
    }
    Err(Error::NoConvergence {
        iters: search.max_iters,
        last_cutoff: last_cut,
        last_estimate: last_est,
        target: k,
    })
}

/// The cold search interval `[0, lambda_max_bound]`.
pub fn cold_interval(l: &LaplacianMatrix) -> (f64, f64) {
    (0.0, l.lambda_max_bound())
}

/// `[lambda/2, min(2 lambda, lambda_max_bound)]` around a previous estimate.
pub fn warm_interval(l: &LaplacianMatrix, previous: f64) -> (f64, f64) {
    let hi = (2.0 * previous).min(l.lambda_max_bound());
    (0.5 * previous, hi)
}

/// Locates a cut-off between `lambda_k` and `lambda_{k+1}` by dichotomy on
/// the eigencount of `d` Gaussian signals drawn once from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn find_lambda_k(
    l: &LaplacianMatrix,
    k: usize,
    d: usize,
    filter: &FilterConfig,
    search: &EigencountConfig,
    interval: Option<(f64, f64)>,
    seed: u64,
    counter: &MatvecCounter,
) -> Result<(CutoffSearch, FeatureMatrix)> {
    if k == 0 || k >= l.n() {
        return Err(invalid(format!("need 1 <= k < n, got k = {k}, n = {}", l.n())));
    }
    if d == 0 {
        return Err(invalid("need at least one signal"));
    }
    let interval = interval.unwrap_or_else(|| cold_interval(l));
    let signals = signal_block(l.n(), 0..d as u64, d, seed);
    let found = bisect_cutoff(l, k, &signals, d, filter, search, interval, counter)?;
    let tags = (0..d as u64).map(|s| ColumnTag { step: 0, stream: s }).collect();
    let features = FeatureMatrix::new(found.filtered.clone(), tags)?;
    Ok((found, features))
}

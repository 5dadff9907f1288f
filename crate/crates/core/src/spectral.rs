//! Dense eigendecomposition baseline: exact spectral features, the ideal
//! low-pass projector, and the two graph-similarity metrics. Everything here
//! is `O(n^3)` and exists as a reference for the compressive path.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd;
use nalgebra::DMatrix;

use crate::cluster::{kmeans, Assignment, KmeansConfig};
use crate::error::{invalid, Error, Result};
use crate::graph::LaplacianMatrix;

/// Default largest `n` accepted by [`eigendecompose`].
pub const DEFAULT_DENSE_CAP: usize = 5000;

/// The bottom `k` eigenpairs of a Laplacian, plus `lambda_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub k: usize,
    /// `lambda_1 <= ... <= lambda_k`
    pub eigenvalues: Vec<f64>,
    /// `lambda_{k+1}`
    pub next_eigenvalue: f64,
    /// `n x k`, orthonormal columns; the first non-negligible coordinate of
    /// every column is positive.
    pub vectors: DMatrix<f64>,
}

impl SpectralBasis {
    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn lambda_k(&self) -> f64 {
        self.eigenvalues[self.k - 1]
    }

    pub fn eigengap(&self) -> f64 {
        self.next_eigenvalue - self.lambda_k()
    }
}

pub fn eigendecompose(l: &LaplacianMatrix, k: usize) -> Result<SpectralBasis> {
    eigendecompose_capped(l, k, DEFAULT_DENSE_CAP)
}

pub fn eigendecompose_capped(l: &LaplacianMatrix, k: usize, cap: usize) -> Result<SpectralBasis> {
    let n = l.n();
    if n > cap {
        return Err(Error::Capacity { n, cap });
    }
    if k == 0 || k >= n {
        return Err(invalid(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    let (values, vectors) = dense_eigh(l)?;
    let mut basis = DMatrix::zeros(n, k);
    for c in 0..k {
        let col = vectors.column(c);
        let lead = col.iter().find(|v| v.abs() > 1e-12).copied().unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            basis[(i, c)] = sign * col[i];
        }
    }
    Ok(SpectralBasis {
        k,
        eigenvalues: values[..k].to_vec(),
        next_eigenvalue: values[k],
        vectors: basis,
    })
}

/// Every eigenvalue of `l`, ascending.
pub fn spectrum(l: &LaplacianMatrix) -> Result<Vec<f64>> {
    Ok(dense_eigh(l)?.0)
}

fn dense_eigh(l: &LaplacianMatrix) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = l.n();
    let mut dense = faer::Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, v) in l.row(i) {
            dense[(i, j)] = v;
        }
    }
    // Sequential so results do not depend on the worker count.
    let par = faer::Par::Seq;
    let mut s = faer::diag::Diag::<f64>::zeros(n);
    let mut u = faer::Mat::<f64>::zeros(n, n);
    let scratch = evd::self_adjoint_evd_scratch::<f64>(n, evd::ComputeEigenvectors::Yes, par, Default::default());
    evd::self_adjoint_evd(
        dense.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        par,
        MemStack::new(&mut MemBuffer::new(scratch)),
        Default::default(),
    )
    .map_err(|e| invalid(format!("eigendecomposition failed: {e:?}")))?;
    let s = s.column_vector();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = order.iter().map(|&i| s[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, c| u[(i, order[c])]);
    Ok((values, vectors))
}

/// `U_k U_k^T X` without forming the `n x n` projector.
pub fn ideal_projector_apply(basis: &SpectralBasis, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != basis.n() {
        return Err(Error::ShapeMismatch(format!(
            "signal has {} rows, basis {}",
            x.nrows(),
            basis.n()
        )));
    }
    let coeffs = basis.vectors.tr_mul(x);
    Ok(&basis.vectors * coeffs)
}

/// `||H_a - H_b||_F`, via `2k - 2 ||U_a^T U_b||_F^2`.
pub fn spectral_similarity(a: &SpectralBasis, b: &SpectralBasis) -> Result<f64> {
    if a.n() != b.n() || a.k != b.k {
        return Err(Error::ShapeMismatch(format!(
            "bases differ: n {} vs {}, k {} vs {}",
            a.n(),
            b.n(),
            a.k,
            b.k
        )));
    }
    if a.vectors == b.vectors {
        return Ok(0.0);
    }
    let gram = a.vectors.tr_mul(&b.vectors);
    let overlap = gram.norm_squared();
    Ok((2.0 * a.k as f64 - 2.0 * overlap).max(0.0).sqrt())
}

/// `||L_a - L_b||_F` over the union of the two sparsity patterns.
pub fn edge_similarity(la: &LaplacianMatrix, lb: &LaplacianMatrix) -> Result<f64> {
    if la.variant() != lb.variant() {
        return Err(Error::VariantMismatch {
            left: la.variant(),
            right: lb.variant(),
        });
    }
    if la.n() != lb.n() {
        return Err(Error::ShapeMismatch(format!("n {} vs {}", la.n(), lb.n())));
    }
    let mut sum = 0.0;
    for i in 0..la.n() {
        let mut ra = la.row(i).peekable();
        let mut rb = lb.row(i).peekable();
        loop {
            let diff = match (ra.peek().copied(), rb.peek().copied()) {
                (None, None) => break,
                (Some((_, va)), None) => {
                    ra.next();
                    va
                }
                (None, Some((_, vb))) => {
                    rb.next();
                    -vb
                }
                (Some((ja, va)), Some((jb, vb))) => {
                    if ja == jb {
                        ra.next();
                        rb.next();
                        va - vb
                    } else if ja < jb {
                        ra.next();
                        va
                    } else {
                        rb.next();
                        -vb
                    }
                }
            };
            sum += diff * diff;
        }
    }
    Ok(sum.sqrt())
}

/// `min(lambda_k^t, lambda_{k+1}^{t-1} - lambda_k^t)`.
pub fn eigengap_alpha(previous: &SpectralBasis, current: &SpectralBasis) -> f64 {
    let lk = current.lambda_k();
    lk.min(previous.next_eigenvalue - lk)
}

/// Spectral clustering: k-means on the rows of `U_k`.
pub fn sc_assign(
    l: &LaplacianMatrix,
    k: usize,
    cfg: &KmeansConfig,
    seed: u64,
) -> Result<(Assignment, SpectralBasis)> {
    let basis = eigendecompose(l, k)?;
    let a = kmeans(&basis.vectors, k, cfg, seed)?;
    Ok((a, basis))
}

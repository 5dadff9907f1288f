use std::io;

use thiserror::Error;

/// Errors produced by the clustering pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dense eigendecomposition refused for n = {n} (cap {cap}); use the compressive path instead")]
    Capacity { n: usize, cap: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("Laplacian variant mismatch: {left:?} vs {right:?}")]
    VariantMismatch {
        left: crate::graph::LaplacianVariant,
        right: crate::graph::LaplacianVariant,
    },

    #[error(
        "cut-off dichotomy did not converge after {iters} iterations \
         (last cut-off {last_cutoff:.6}, last eigencount {last_estimate:.4}, target {target})"
    )]
    NoConvergence {
        iters: usize,
        last_cutoff: f64,
        last_estimate: f64,
        target: usize,
    },

    #[error("step {step} of the sequence failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

//! Compressive spectral clustering for static and time-evolving graphs.
//!
//! Spectral clustering needs the bottom `k` eigenvectors of a graph
//! Laplacian. The compressive variant replaces them with `d` Gaussian signals
//! passed through a Chebyshev approximation of the ideal low-pass filter,
//! which costs `O(m |E| d)` sparse operations instead of a dense
//! eigendecomposition. The dynamic variant clusters a sequence of graphs,
//! carrying a share of the filtered signals from one step to the next and
//! re-estimating the filter cut-off only when an eigencount check fails.
//!
//! | module | contents |
//! |---|---|
//! | [`graph`] | sparse graphs, Laplacians, stochastic block model, perturbations, edge-list I/O |
//! | [`spectral`] | dense eigendecomposition baseline, ideal projector, graph similarity metrics |
//! | [`filter`] | Chebyshev filters, eigencount, cut-off dichotomy |
//! | [`cluster`] | k-means and the Frobenius-form k-means cost |
//! | [`csc`] | static compressive clustering and the singular-value alignment |
//! | [`dynamic`] | clustering a graph sequence with feature reuse |
//! | [`experiment`] | similarity and dynamic-clustering studies emitting CSV |

pub mod cluster;
pub mod csc;
pub mod dynamic;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod graph;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};

//! Heterophilous graph learning toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`sparse`]: CSR matrices and the sparse-dense product used by every model.
//! - [`graph`]: the immutable [`Graph`] type, dataset I/O, homophily metrics,
//!   compatibility matrices and derived neighbourhoods.
//! - [`tensor`]: a small reverse-mode differentiation tape with Adam and a
//!   finite-difference gradient checker.
//! - [`htmp`]: declarative multi-neighbourhood message passing (indicator and
//!   guidance channels, COMBINE and FUSE rules) and preset baselines.
//! - [`cmgnn`]: the compatibility-matrix-aware model, its estimator and its
//!   training protocol.
//! - [`synth`]: synthetic graphs generated from a target compatibility matrix.
//! - [`bench`]: multi-split benchmarking, degree buckets, random search,
//!   heatmaps and timing reports.

pub mod bench;
pub mod cmgnn;
pub mod error;
pub mod fsio;
pub mod graph;
pub mod htmp;
pub mod rng;
pub mod sparse;
pub mod synth;
pub mod tensor;
pub mod train;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use graph::{CompatibilityMatrix, Graph, Split};
pub use sparse::SparseMatrix;

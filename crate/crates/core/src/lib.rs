//! Gaussian regularization of spectra of non-normal matrices.
//!
//! Adding a small Ginibre matrix √t·G to a non-normal matrix A makes its
//! eigenvalues track the Brown measure of the ⋆-moment limit of A. This crate
//! provides the pieces needed to observe that numerically:
//!
//! - [`linalg`]: dense complex spectra, singular values and ⋆-word moments.
//! - [`ensembles`]: seeded Ginibre, GUE, elliptic and deterministic matrices.
//! - [`fk`]: Fuglede–Kadison determinants and Gram-volume decompositions.
//! - [`brown`]: log-potential fields, discrete Brown densities, reference
//!   measures and distances.
//! - [`flow`]: the stochastic flow of singular values under matrix Brownian
//!   motion, with a shared-noise comparison coupling.
//! - [`pipeline`]: regularization schedules, experiments, t-sweeps and reports.

extern crate lapack_src;

pub mod brown;
pub mod ensembles;
pub mod error;
pub mod fk;
pub mod flow;
pub mod linalg;
pub mod pipeline;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};

//! Fractional-in-time stochastic fields on bounded domains: Mittag-Leffler
//! evaluation, Dirichlet eigen-systems, spectral kernels, Monte Carlo
//! ensembles and regularity checks.

// `!(x > 0.0)` is how inputs are screened for NaN throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyze;
pub mod bessel;
pub mod domains;
pub mod error;
pub mod kernels;
pub mod mlf;
pub mod quadrature;
pub mod simulate;
pub mod spectrum;
pub mod special;

pub use error::{Error, Result};

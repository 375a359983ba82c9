//! Core algorithms for combining non-mixing parallel Bayesian computations.
//!
//! Given posterior draws from several chains (or variational / mode-based
//! runs) that fail to mix with each other, this crate builds one predictive
//! distribution out of them:
//!
//! 1. [`draws`] — the multi-chain data model: per-chain parameter draws and
//!    pointwise log-likelihood matrices.
//! 2. [`diagnostics`] — within-chain split-R̂, effective sample size, and
//!    between-chain clustering of predictively indistinguishable chains.
//! 3. [`psis`] — Pareto-smoothed importance-sampling approximation of each
//!    chain's leave-one-out predictive density, with k̂ reliability
//!    diagnostics.
//! 4. [`stacking`] — simplex weights over chains maximizing the stacked
//!    leave-one-out log score under a Dirichlet regularizer, plus
//!    pseudo-BMA / uniform / mode-height baselines.
//! 5. [`combine`] — weighted Monte Carlo estimation and quasi-Monte-Carlo
//!    thinning of the weighted draw set back into plain draws.
//! 6. [`cauchy`] — an analytic Cauchy-mixture test bed whose mode locations,
//!    bimodality boundary, and predictive scores have closed forms, used to
//!    verify the whole pipeline end to end.
//!
//! The crate is `no_std` (with `alloc`): floating-point math resolves
//! through `libm` and every randomized routine runs on an explicitly
//! seeded counter-based generator, so results are reproducible across
//! platforms. File formats, JSON output, and the command-line interface
//! live in the companion `chainstack` crate.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]
// guards of the form !(x > 0.0) intentionally reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cauchy;
pub mod combine;
pub mod diagnostics;
pub mod draws;
mod error;
pub mod poly;
pub mod psis;
pub mod quad;
pub mod stacking;

pub use error::CoreError;

// Re-exported so downstream crates build the matrix types this API takes
// and returns without pinning their own copy.
pub use ndarray;

/// Crate result type.
pub type Result<T> = core::result::Result<T, CoreError>;

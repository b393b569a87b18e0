//! Count-data regression and goodness-of-fit graphics.
//!
//! The crate fits Poisson, negative binomial (NB2), hurdle, zero-truncated and
//! finite-mixture count regressions by maximum likelihood and diagnoses them
//! with weighted rootograms, randomized quantile residuals, Pearson residuals
//! and parametric bootstrap bands.
//!
//! Module map:
//!
//! - [`dist`]: pmf / cdf / sampling kernels for the count families.
//! - [`fit`]: maximum-likelihood fitters, information criteria, prediction.
//! - [`model`]: a single handle over GLM, hurdle and mixture fits.
//! - [`rootogram`]: observed / expected frequency tables and plot geometry.
//! - [`diagnostics`]: residuals, Q-Q envelopes, bootstrap bands.
//! - [`formula`]: formula parsing, CSV ingestion, design matrices.
//!
//! Monte Carlo style loops (bootstrap replications, EM restarts, per-row
//! expected frequencies) run on rayon when the `parallel` feature is on
//! (the default) and sequentially otherwise. Results are identical either
//! way: every parallel map collects in input order before any floating-point
//! reduction, and every random stream is derived from a master seed.

pub mod diagnostics;
pub mod dist;
pub mod fit;
pub mod formula;
pub mod model;
pub mod rootogram;

mod error;
mod optim;
mod par;
mod rng;
mod special;

pub use error::{Error, Result};
pub use par::is_parallel;
pub use rng::{derive_seed, seeded_rng, Rng};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20160906;

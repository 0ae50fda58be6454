//! Heat-kernel smoothed Fréchet means and variances on flat tori, their
//! small-time asymptotic expansions, and Monte Carlo experiment drivers.
//!
//! The classical Fréchet variance of a distribution μ on a torus minimizes
//! the expected squared geodesic distance.  Replacing the squared distance
//! with the heat-kernel cost `F_t(x, ξ) = -2t log K(t, x, ξ)` produces a
//! smooth surrogate whose minimizers and minimum values converge to their
//! metric counterparts as `t ↓ 0`, with first-order corrections governed by
//! the mass the distribution places near the cut locus.  This crate
//! implements the whole pipeline:
//!
//! - [`manifold`]: flat torus geometry (wrap, exp/log, distances, grids);
//! - [`heat`]: the heat kernel, the cost `F_t`, and its exact derivatives;
//! - [`density`]: population densities (uniform, von Mises, tabulated,
//!   mixtures of products) with exact samplers;
//! - [`quadrature`]: deterministic population expectations of cost-like
//!   integrands, sharp near the cut locus;
//! - [`varadhan`]: the smoothed objective, its minimizers, means, and
//!   variances for populations and samples;
//! - [`asymptotics`]: cut-locus correction terms, small-time limits of
//!   gradients/Hessians, and limiting covariances;
//! - [`montecarlo`]: seeded, parallel uniform-law-of-large-numbers and
//!   central-limit experiments;
//! - [`config`] / [`report`] / [`cli`]: TOML-driven experiment
//!   configuration, deterministic CSV/JSON reporting, and the command-line
//!   driver.

// Negated comparisons like `!(t > 0.0)` are deliberate throughout this
// crate: unlike `t <= 0.0` they are also true for NaN, so malformed inputs
// fail closed instead of slipping past validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod config;
pub mod density;
pub mod error;
pub mod heat;
pub mod manifold;
pub mod montecarlo;
mod numerics;
pub(crate) mod quadrature;
pub mod report;
pub mod special;
pub mod varadhan;

pub use asymptotics::{CovarianceReport, JTermSchedule};
pub use density::{Density, SampleSet};
pub use error::{Error, Result};
pub use montecarlo::{ExperimentConfig, ExperimentReport};
pub use varadhan::{MeanResult, VaradhanFunction};

//! Simulation of stochastic functional differential equations with full
//! finite memory through the memory-gap approximation `x^k`, plus a Monte
//! Carlo suite that measures its moment bounds, Hölder regularity and strong
//! convergence rate.
//!
//! The crate is organized bottom-up:
//!
//! * [`paths`]: grids, sample paths, segments and initial processes;
//! * [`drivers`]: reproducible Brownian increments shared across gap sizes;
//! * [`models`]: drift/diffusion functionals and the built-in models;
//! * [`scheme`]: the memory-gap solver and its variants;
//! * [`analysis`]: strong-error, rate, moment, Hölder and oracle checks;
//! * [`cli`]: configuration files and the `simulate | converge | validate`
//!   commands.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod drivers;
pub mod error;
pub mod models;
pub mod paths;
pub mod scheme;

pub use error::{Error, Result};

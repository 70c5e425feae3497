//! Gradient-free training of feedforward networks by proximal block
//! coordinate descent on a lifted, block-multiconvex objective.
//!
//! The network constraints `z = W a + b`, `a = h(z)` are replaced by
//! quadratic penalties with auxiliary variables `u`, and the activation
//! `h` is realised as a projection onto a closed interval. Every block
//! subproblem then has a closed-form proximal solution, and one backward
//! Gauss-Seidel sweep over all blocks makes one training epoch.
//!
//! Crate layout:
//! - [`numerics`]: dense kernels (Gram products, Cholesky solves, sampling).
//! - [`prox`]: activation projections and the prox-composition rule.
//! - [`model`]: network spec, parameters, lifted state and objectives.
//! - [`bcd`]: the block updates, momentum rule, sweep and trainer.
//! - [`sgd`]: a backprop + minibatch SGD baseline.
//! - [`data`]: dataset loaders and synthetic generators.
//! - [`metrics`], [`config`], [`run`]: reporting and the CLI driver.

pub mod bcd;
pub mod config;
pub mod data;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod prox;
pub mod run;
pub mod sgd;

mod error;

pub use error::{Error, Result};

//! Simulation and rough-path numerics for additive functionals of
//! stationary Markov processes.
//!
//! The crate covers three model classes (random conductance walks, a
//! non-reversible two-dimensional Ornstein-Uhlenbeck process, diffusions
//! with periodic coefficients), their level-2 lifts and p-variation norms,
//! closed-form and spectral predictions of the limiting covariance and
//! area anomaly, and the Monte-Carlo machinery comparing the two.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod homog;
pub mod matrix;
pub mod mc;
pub mod models;
pub mod rde;
pub mod rng;
pub mod tensor_path;
pub mod variation;

pub use error::{Error, Result};
pub use matrix::Matrix;

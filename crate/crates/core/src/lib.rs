//! κ-generalized statistical mechanics for irreversible open systems.
//!
//! - [`kappa_fn`]: κ-exponential, κ-logarithm and its derivative.
//! - [`ensemble`]: path ensembles and the constrained maximum-entropy solver.
//! - [`entropy`]: κ-entropy, entropy generation, Lagrangian, stability criterion.
//! - [`ergodic`]: time averages, ε-steady states, Wiener–Krein regularity,
//!   phase-volume contraction.
//! - [`cli`]: the batch front end behind the `kappastat` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ensemble;
pub mod entropy;
pub mod ergodic;
pub mod error;
pub mod kappa_fn;

pub use error::{Error, Result};
pub use kappa_fn::{kappa_exp, kappa_log, kappa_log_deriv, KappaParam};

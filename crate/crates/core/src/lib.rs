//! Representational transfer learning for noisy matrix completion.
//!
//! The pipeline debiases per-source completion estimates into an unbiased
//! matrix-valued dataset, integrates their singular subspaces on the
//! Grassmannian (optionally with robust source selection), solves the target
//! task as a low-dimensional regression in the learned representation, and
//! provides post-transfer confidence intervals for bilinear functionals.
//! A seeded Monte Carlo harness generates the synthetic scenarios used by the
//! acceptance suite.

pub mod completion;
pub mod error;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod seed;
pub mod sim;
pub mod subspace;
pub mod transfer;

pub use error::{Error, Result};
pub use seed::child_seed;

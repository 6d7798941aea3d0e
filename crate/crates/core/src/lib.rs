//! Support reduction for minimizing convex functionals over the cone
//! generated by a parametric family of densities.
//!
//! Two models are included: least-squares estimation of a convex decreasing
//! density ([`lsconvex`]) and maximum likelihood Gaussian deconvolution
//! ([`mldeconv`]). Grid solutions can be refined off the grid with
//! [`gridless::fine_tune`].

pub mod cli;
pub mod error;
pub mod family;
pub mod gridless;
pub mod linalg;
pub mod lsconvex;
pub mod mldeconv;
pub mod sample;
pub mod solver;

pub use error::{Error, Result};

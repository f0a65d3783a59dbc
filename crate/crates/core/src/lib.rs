//! Numerical laboratory for model Fano fibrations `P1 x P1 -> P1`.
//!
//! Everything is torus invariant and sampled in moment coordinates. The
//! crate builds the fiberwise prescribed-Ricci and Kähler-Einstein forms,
//! the Weil-Petersson-type form of the fibration, the base Monge-Ampère
//! metrics, and checks the identities relating them as residuals.

pub mod basespace;
pub mod calculus;
pub mod cohomology;
pub mod config;
pub mod convergence;
pub mod error;
pub mod fiberwise;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod newton;
pub mod pipeline;
pub mod poisson;
pub mod quadrature;
pub mod report;
pub mod wpform;

pub use error::{Error, Result};

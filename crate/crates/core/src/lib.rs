//! Numerical machinery for Gaussian and spherical waist inequalities.

pub mod convex;
pub mod manifold;
pub mod error;
pub mod measures;
pub mod pancake;
pub mod numeric;
pub mod rng;
pub mod transport;
pub mod tube;
pub mod waist;

pub use error::{Error, Result};

/// Crate version recorded in experiment artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

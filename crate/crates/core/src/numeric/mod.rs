//! Numerical building blocks shared by the geometry and transport modules.

pub mod barrier;
pub mod constrained;
pub mod optimize;
pub mod quadrature;
pub mod special;

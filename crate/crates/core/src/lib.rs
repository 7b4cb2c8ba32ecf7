//! Meshless symmetric collocation for Dirichlet problems `κ²u − Δ*u = f`
//! on spherical caps, using the compactly supported Wendland kernel.

pub mod cli;
pub mod collocation;
pub mod config;
pub mod convergence;
pub mod error;
pub mod franke;
pub mod kernel;
pub mod linalg;
pub mod pointsets;
pub mod sphere;

pub use error::{Error, Result};

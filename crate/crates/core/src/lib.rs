//! Spectral simulation of the cubic wave equation on S³ with randomized
//! initial data, together with the Monte Carlo and quadrature checks that
//! back each step of the probabilistic global existence argument and its
//! transfer to ℝ³ through the Penrose map.

pub mod error;
pub mod harness;
pub mod linear_flow;
pub mod nlw;
pub mod penrose;
pub mod quadrature;
pub mod random_basis;
pub mod random_data;
pub mod rng;
pub mod sphere;
pub mod stats;

pub use error::{Error, Result};

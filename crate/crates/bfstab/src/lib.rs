//! Benjamin-Feir instability of finite-depth Stokes waves.
//!
//! Depth coefficients, second-order Stokes expansion, truncated Bloch-Floquet
//! operators, Kato reduction to a 4×4 Hamiltonian matrix and its block
//! decoupling, and leading-order instability predictions.

pub mod coeffs;
pub mod error;
pub mod fourier;
pub mod kato;
pub mod operator;
pub mod reduction;
pub mod spectrum;
pub mod stokes;
pub mod validation;

pub use coeffs::{critical_depth, depth_coefficients, Depth, DepthCoefficients};
pub use error::{Error, Result};
pub use fourier::{FourierField, Parity};

//! Numerical library for the growth-fragmentation inverse problem: recovering
//! the fragmentation rate from noisy measurements of the stable size
//! distribution and its growth exponent, by spectral filtering on the Fourier
//! side of the transport group (ℝ⁺, ⊙_ρ).

pub mod direct;
pub mod error;
pub mod fourier;
pub mod inverse;
pub mod kernels;
mod quad;
pub mod transport;

pub use error::{Error, Result};

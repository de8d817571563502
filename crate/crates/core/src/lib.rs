//! Numerical toolkit for fractional Sobolev, Hardy-Littlewood-Sobolev and
//! Beckner-Onofri type inequalities on the Heisenberg group `H^n` and on the
//! CR sphere `S^{2n+1}`.
//!
//! Scalar constants ([`constants`]) are available for every `n`; the
//! geometric and spectral layers ([`grid`], [`harmonics`], [`conformal`],
//! [`functionals`], [`manifold`]) work on the three-sphere `S^3 ⊂ C^2`
//! (`n = 1`), where every quadrature is exact for band-limited data.

pub mod conformal;
pub mod constants;
pub mod error;
pub mod experiments;
pub mod functionals;
pub mod grid;
pub mod harmonics;
pub mod heisenberg;
pub mod manifold;
mod optimize;
pub mod quadrature;

pub use error::{Error, Result};

//! Discrete Schrödinger operators `H_V = −Δ + V` with Dirichlet conditions on
//! masked grids, and numerical checks of the estimates around their heat
//! kernels, resolvent powers, commutators and spectral multipliers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amalgam;
pub mod commutator;
pub mod error;
pub mod exponent;
pub mod fftconv;
pub mod grid;
pub mod kato;
pub mod multiplier;
pub mod norms;
pub mod operator;
#[cfg(test)]
mod properties;
pub mod quadrature;
pub mod report;
pub mod resolvent;
pub mod runner;
pub mod scalar;
pub mod scenario;
pub mod semigroup;
pub mod sweep;

pub use error::{Error, Result};
pub use exponent::Exponent;
pub use grid::{build_domain, make_mollifier, GridDomain, GridFunction, Potential, ShapeSpec};
pub use scalar::{Scalar, C64};

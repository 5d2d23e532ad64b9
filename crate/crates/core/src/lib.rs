//! One-dimensional compressible Navier-Stokes with degenerate viscosity
//! `mu(rho) = mu * rho^alpha`, solved in primitive `(rho, u)` form and in
//! effective-velocity `(rho, v)` form, `v = u + d/dx phi(rho)`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constitutive;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod mesh;
pub mod solver;

pub use error::{Error, Result};

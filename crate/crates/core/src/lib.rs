//! Simulation and verification tools for the damped inhomogeneous nonlinear
//! Schrödinger equation
//!
//! ```text
//! i u_t + Δu + μ |x|^{-b} |u|^α u + i a u = 0,   x ∈ R^N, N ≤ 3.
//! ```
//!
//! The crate provides parameter validation, a pseudo-spectral propagator for
//! the gauged field v = e^{at} u, conserved and virial functionals, closed
//! form lifespan and blow-up bounds, the ground state of the undamped
//! mass-critical problem, scattering diagnostics and initial-data recipes.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod groundstate;
pub mod initdata;
pub mod model;
pub mod scattering;

pub use error::{Error, Result};
pub use grid::{Field, Grid, SingularWeight, Spectral};
pub use model::ModelParams;

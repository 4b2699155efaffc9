//! Doubly periodic vortex pairs of a self-dual gauged sigma model.
//!
//! This crate computes multivortex solutions of a fourth-order semilinear
//! elliptic equation on the unit torus,
//!
//!   ε²Δ²u − Δu + stable nonlinear terms = source,
//!
//! arising from a gauged O(3) sigma model with both Maxwell and
//! Chern–Simons terms. Prescribed point vortices enter through a singular
//! background σ (Ewald lattice sums); the unknown u is smooth and periodic
//! and is found variationally: a constrained descent under an explicit
//! supersolution barrier produces a first solution, and a mountain-pass
//! search above it produces a second, energetically higher one. A
//! continuation in ε connects the family to the second-order limit problem.
//!
//! Module map:
//! - [`grid`], [`operators`]: spectral toolbox on the torus.
//! - [`special`]: exponential integral (Ewald real-space kernel).
//! - [`background`]: vortex configurations and the singular background σ.
//! - [`profile`]: the nonlinearity profile and its stable composites.
//! - [`energy`]: energy functional, gradient, residuals, identity checks.
//! - [`barrier`]: explicit supersolution and the coupling threshold λ₀.
//! - [`solver`]: constrained descent, Newton polish, mountain pass,
//!   continuation in ε.
//! - [`config`], [`io`], [`report`]: run configs, field dumps, reports.

pub mod background;
pub mod barrier;
pub mod energy;
pub mod error;
pub mod grid;
pub mod io;
pub mod operators;
pub mod profile;
pub mod solver;
pub mod special;

pub use error::{Error, Result};

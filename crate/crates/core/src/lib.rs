//! Simulator and verification harness for the half-line nonlinear
//! Schrödinger equation with a power-nonlinearity Robin boundary condition:
//!
//! ```text
//!     i ∂_t u − ∂_xx u + k |u|^p u + i a u = 0,     x ∈ (0, ∞), t > 0,
//!     ∂_x u(0, t) = −λ |u(0, t)|^r u(0, t),
//!     u(x, 0) = u₀(x),
//! ```
//!
//! with λ > 0, p > 0, k > 0, r > 0 and damping a ≥ 0. The boundary term
//! pumps energy in through x = 0 while the defocusing interior nonlinearity
//! and the damping push back; depending on (r, p, a) and the data, solutions
//! either stabilize to zero or blow up in finite time.
//!
//! The crate provides:
//!
//! - [`theory`]: the parameter-regime classifier, blow-up certificates
//!   (momentum condition, predicted blow-up times), and small-data reports.
//! - [`grid`]: uniform half-line grids truncated at x = L with a Dirichlet
//!   cap, trapezoid quadrature, and difference operators.
//! - [`dynamics`]: a Crank–Nicolson evolver with the nonlinear boundary
//!   condition eliminated through a ghost node, an independent adaptive
//!   Runge–Kutta oracle, and manufactured-solution forcing.
//! - [`diagnostics`]: the conserved/monitored functionals (mass, energy,
//!   variance, momentum flux, the θ/θ₁ pair) and the identity-residual
//!   suite that checks the simulator against the exact balance laws.
//! - [`detector`]: blow-up verdicts with refinement consistency, decay-rate
//!   fits, and small-data stabilization bounds.
//! - [`sweep`]: parameter sweeps over (r, p, a, λ, data) producing a phase
//!   table with per-cell agreement against the predicted regime behaviour.
//! - [`config`]: the flat `key = value` run-configuration format shared by
//!   the command-line driver and the test suites.

// `!(x > y)` is used as a NaN-rejecting guard throughout: unlike `x <= y`,
// it fails closed when a diagnostic or parameter has gone non-finite.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detector;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod params;
pub mod sweep;
pub mod theory;

pub use error::{ConfigError, DetectorError, DiagnosticsError, GridError, ParamError, SolverError};
pub use grid::{Field, Grid};
pub use params::ModelParams;

/// Complex scalar used throughout (64-bit components).
pub type C64 = num_complex::Complex64;

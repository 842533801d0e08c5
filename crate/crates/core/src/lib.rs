//! Phase-space diffusion model: grids, the Heisenberg-group operator
//! calculus, the quantization map, dynamics, observables and oracles.

pub mod calculus;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod fourier;
pub mod grid;
pub mod hamiltonian;
pub mod hermite;
pub mod observables;
pub mod oracles;
pub mod params;
pub mod quantization;
pub mod states;

pub use num_complex::Complex64 as C64;

pub use crate::error::{Error, Result};
pub use crate::field::{boundary_max, check_boundary, inner, norm_sq, ConfigField, DensityField, Domain, Field, MixedField, PhaseField};
pub use crate::grid::{ConfigGrid, PhaseGrid};
pub use crate::hamiltonian::{HamiltonianSpec, Potential};
pub use crate::params::ModelParams;

/// Stored states must fall below this magnitude on the outermost grid shell.
pub const DECAY_TOL: f64 = 1e-12;
/// Discarded-mass limit for truncated Hermite expansions.
pub const TRUNC_TOL: f64 = 1e-9;
/// Slack for sign checks on quadratic forms.
pub const QUADRATURE_TOL: f64 = 1e-10;

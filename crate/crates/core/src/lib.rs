//! Spectral solver and experiment toolkit for the radial defocusing wave
//! equation `u_tt − Δu + |u|^{p−1}u = 0` outside the unit ball in ℝ³, with
//! Dirichlet conditions on the unit sphere.
//!
//! Radial fields are stored as `g = r·u` on an equispaced grid over
//! `r ∈ [1, 1+L]`; in those variables the Dirichlet Laplacian is diagonalized
//! by a discrete sine transform, which gives exact linear propagators and a
//! cheap Littlewood–Paley calculus.

pub mod analysis;
pub mod distorted_fourier;
pub mod error;
pub mod radial_field;
pub mod spectral_calculus;
pub mod wave_dynamics;

pub use error::{Error, Result};
pub use radial_field::{make_grid, RadialField, RadialGrid, WaveState};
pub use spectral_calculus::ParameterSet;

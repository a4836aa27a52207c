//! Multiresolution template-regression census of coherent vortices in
//! two-dimensional vorticity fields.
//!
//! The pipeline runs [`modwt`] (non-decimated wavelet MRA) →
//! [`template`] (Gaussian template basis) → [`scan`] (regression at every
//! grid point, Λ map, candidates) → [`census`] (forward selection under GCV
//! with backfitting). [`turbsim`] generates decaying-turbulence and
//! planted-vortex test fields, and [`scaling`] fits power laws to census
//! statistics over time.

pub mod census;
pub mod error;
pub mod grid;
pub mod io;
pub mod modwt;
pub mod scaling;
pub mod scan;
pub mod solver;
pub mod spectral;
pub mod template;
pub mod turbsim;

pub use error::{Error, Result};
pub use grid::{circular_shift, cross_correlation_map, Field, VorticityField};

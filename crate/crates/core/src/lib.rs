//! Simulation and analysis toolkit for evanescent-field nanoparticle sensing
//! with exposed-core optical fibers.
//!
//! The crate is split along the measurement chain:
//!
//! * [`modes`]: scalar finite-difference mode solver for the fiber cross-section,
//!   evanescent profiles and mode powers.
//! * [`scattering`]: dipole scattering, the evanescent sphere-cap weight and
//!   collection-efficiency mapping to collected power.
//! * [`transit`]: Brownian transits of suspended particles producing signal
//!   power envelopes with ground-truth events.
//! * [`sensing`]: heterodyne photocurrent synthesis, lock-in demodulation,
//!   filtering, spectral estimation, noise fits and event detection.
//! * [`config`] and [`cli`]: reproducible experiment runs driven by a TOML file.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod modes;
pub mod rng;
pub mod scattering;
pub mod sensing;
pub mod transit;

pub use error::{Error, Result};

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

//! muflux: directional cosmic-muon flux modeling for finite rectangular
//! detectors, coincidence counting statistics, and underground screening
//! analysis.
//!
//! The crate covers the full chain from raw detector logs to physics
//! results:
//!
//! - [`geometry`]: telescope / solid-chip geometries, aperture angles, and
//!   the inclination-dependent effective area;
//! - [`atmosphere`]: the curvature-corrected zenith intensity law and the
//!   tilted-frame zenith transformation;
//! - [`rate_model`]: the total-rate quadrature, angular sweeps, and a
//!   seeded Monte Carlo ray-tracing oracle;
//! - [`counting`]: Poisson rate statistics and accidental-coincidence
//!   subtraction;
//! - [`fitting`]: closed-form weighted least-squares estimation of the
//!   vertical intensity from an angular sweep;
//! - [`attenuation`]: underground screening factors, water-equivalent
//!   depths, and chip impact-rate predictions;
//! - [`ingest`]: the versioned counter log format and windowed rate
//!   aggregation.

pub mod atmosphere;
pub mod attenuation;
pub mod counting;
pub mod error;
pub mod fitting;
pub mod geometry;
pub mod ingest;
pub mod rate_model;

pub use error::{Error, Result};

//! Numerical library for an atom held near a perfectly reflecting mirror:
//! closed-form and thermal Casimir-Polder forces, the colored noise kernel of
//! the atom's Langevin equation, and Monte Carlo estimation of the
//! mirror-induced dispersion of a trapped atomic cloud.
//!
//! Everything is expressed in natural units (hbar = c = 1). The mirror
//! occupies the z = 0 plane and the atom sits at height z > 0. The atom's
//! internal degree of freedom is a harmonic oscillator with reduced mass `m`
//! and frequency `Omega`, coupled to the electromagnetic field with charge
//! `q`; the center of mass has mass `M`.

pub mod cpforce;
pub mod error;
pub mod greens;
pub mod langevin;
pub mod noise;
pub mod params;
mod quad;
pub mod specfun;

pub use error::{Error, Result};
pub use params::{AtomParams, InverseTemperature, SpacetimePoint, ThermalConfig, TimeGrid, TrapConfig};

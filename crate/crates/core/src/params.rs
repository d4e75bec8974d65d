use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atom model parameters in natural units (hbar = c = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomParams {
    /// Coupling charge of the internal dipole to the field.
    pub q: f64,
    /// Reduced mass of the internal oscillator.
    pub m: f64,
    /// Natural frequency of the internal oscillator.
    pub omega: f64,
    /// Center-of-mass mass.
    pub mass_com: f64,
}

impl AtomParams {
    pub fn new(q: f64, m: f64, omega: f64, mass_com: f64) -> Result<Self> {
        let p = Self { q, m, omega, mass_com };
        p.validate()?;
        Ok(p)
    }

    /// q = m = Omega = M = 1.
    pub fn unit() -> Self {
        Self { q: 1.0, m: 1.0, omega: 1.0, mass_com: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("q", self.q), ("m", self.m), ("omega", self.omega), ("M", self.mass_com)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("atom parameter {name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// An inverse temperature that may be infinite (vacuum / ground state).
/// Serialized as a JSON number, with `null` standing for infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseTemperature(pub f64);

impl Serialize for InverseTemperature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_some(&self.0)
        } else {
            s.serialize_none()
        }
    }
}

impl<'de> Deserialize<'de> for InverseTemperature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Option<f64> = Option::deserialize(d)?;
        Ok(Self(v.unwrap_or(f64::INFINITY)))
    }
}

impl InverseTemperature {
    pub const VACUUM: Self = Self(f64::INFINITY);

    pub fn new(beta: f64) -> Result<Self> {
        if beta > 0.0 {
            Ok(Self(beta))
        } else {
            Err(Error::Domain(format!("inverse temperature must be positive (or infinite), got {beta}")))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Field and oscillator temperatures plus image-sum truncation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalConfig {
    /// Field inverse temperature beta.
    pub beta: InverseTemperature,
    /// Oscillator inverse temperature beta-bar.
    pub beta_bar: InverseTemperature,
    /// Symmetric truncation order of imaginary-time image sums.
    pub k_max: usize,
    /// Tolerance on the analytic tail estimate of truncated sums.
    pub sum_tol: f64,
}

impl ThermalConfig {
    /// Both reservoirs in their ground state.
    pub fn vacuum() -> Self {
        Self {
            beta: InverseTemperature::VACUUM,
            beta_bar: InverseTemperature::VACUUM,
            k_max: 64,
            sum_tol: 1e-10,
        }
    }

    pub fn with_temperatures(beta: InverseTemperature, beta_bar: InverseTemperature) -> Self {
        Self { beta, beta_bar, ..Self::vacuum() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::Domain("k_max must be at least 1".into()));
        }
        if !(self.sum_tol > 0.0) {
            return Err(Error::Domain(format!("sum_tol must be positive, got {}", self.sum_tol)));
        }
        Ok(())
    }
}

/// Event in Minkowski space; the mirror occupies the z = 0 plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpacetimePoint {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        Self { t, x, y, z }
    }

    /// Static worldline point at height z.
    pub fn static_at(t: f64, z: f64) -> Self {
        Self { t, x: 0.0, y: 0.0, z }
    }
}

/// Uniform time grid t_i = t0 + i dt, i = 0..n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n: usize) -> Result<Self> {
        let g = Self { t0, dt, n };
        g.validate_basic()?;
        Ok(g)
    }

    pub fn validate_basic(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n < 2 {
            return Err(Error::Domain(format!("grid needs n >= 2 samples, got {}", self.n)));
        }
        Ok(())
    }

    /// Check that the step resolves the internal period and the light bounce:
    /// dt <= min(2 pi / Omega, 2 z) / 20.
    pub fn validate_resolution(&self, omega: f64, z: f64) -> Result<()> {
        self.validate_basic()?;
        let limit = (2.0 * std::f64::consts::PI / omega).min(2.0 * z) / 20.0;
        if self.dt > limit {
            return Err(Error::StepSize(format!(
                "dt = {} does not resolve the kernel; need dt <= {limit:.4e} for Omega = {omega}, z = {z}",
                self.dt
            )));
        }
        Ok(())
    }

    pub fn span(&self) -> f64 {
        self.dt * self.n as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.t0 + self.dt * i as f64)
    }
}

/// Harmonic trap for the atom's center of mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Trap frequencies (Omega_x, Omega_y, Omega_z).
    pub omega_trap: [f64; 3],
    /// Mean distance of the trap center from the mirror.
    pub z_bar: f64,
    /// Renormalize the z frequency by the CP force gradient.
    pub include_cp_shift: bool,
    /// Optional small damping, a numerical stationarity aid only.
    #[serde(default)]
    pub gamma: f64,
}

impl TrapConfig {
    pub fn isotropic(omega_t: f64, z_bar: f64) -> Self {
        Self { omega_trap: [omega_t; 3], z_bar, include_cp_shift: true, gamma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.omega_trap.iter().enumerate() {
            if !(*w > 0.0 && w.is_finite()) {
                return Err(Error::Domain(format!("trap frequency [{i}] must be positive, got {w}")));
            }
        }
        if !(self.z_bar > 0.0 && self.z_bar.is_finite()) {
            return Err(Error::Domain(format!("z_bar must be positive, got {}", self.z_bar)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Domain(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        Ok(())
    }

    /// Margin of the linearization validity condition
    /// |Omega_k^2 - Omega^2| >> q^2 / (m Omega^3 M z^6); requires margin >= 100.
    pub fn validity_margin(&self, p: &AtomParams) -> f64 {
        let scale = p.q * p.q / (p.m * p.omega.powi(3) * p.mass_com * self.z_bar.powi(6));
        self.omega_trap
            .iter()
            .map(|w| (w * w - p.omega * p.omega).abs() / scale)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_regime(&self, p: &AtomParams) -> Result<()> {
        let margin = self.validity_margin(p);
        if margin < 100.0 {
            return Err(Error::Regime(format!(
                "validity condition margin {margin:.1} < 100 at z_bar = {}",
                self.z_bar
            )));
        }
        Ok(())
    }
}

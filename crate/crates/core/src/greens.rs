//! Worldfunction geometry, vacuum and thermal Hadamard functions with mirror
//! images, and the internal-oscillator kernels.
//!
//! Conventions: metric (-,+,+,+); Synge worldfunction sigma = half the
//! squared geodesic interval; mirror image sigma~ = sigma + 2 z z'. The
//! massless-field Hadamard function is G_H = 1/(2 pi^2 (r^2 - dt^2)) with a
//! principal-value prescription on the light cone, equivalently
//! G_H(sigma) = 1/(4 pi^2 sigma).

use crate::error::{Error, Result};
use crate::params::{AtomParams, InverseTemperature, SpacetimePoint, ThermalConfig};
use crate::specfun::thermal_coth_factor;

const PI: f64 = std::f64::consts::PI;

/// Synge worldfunction sigma(a, b) = [-(dt)^2 + |dx|^2] / 2.
pub fn worldfunction(a: SpacetimePoint, b: SpacetimePoint) -> f64 {
    let dt = a.t - b.t;
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    0.5 * (-dt * dt + dx * dx + dy * dy + dz * dz)
}

/// Image worldfunction sigma~(a, b) = sigma(a, b) + 2 z_a z_b.
pub fn image_worldfunction(a: SpacetimePoint, b: SpacetimePoint) -> f64 {
    worldfunction(a, b) + 2.0 * a.z * b.z
}

/// Vacuum Hadamard function of a massless field, G_H = 1/(2 pi^2 (r^2 - dt^2)).
///
/// Exactly on the light cone (r = |dt|) the principal-value pole is reached
/// and a pole error is returned; callers handle the pole by subtraction.
pub fn hadamard_vacuum(dt: f64, r: f64) -> Result<f64> {
    let denom = r * r - dt * dt;
    if denom == 0.0 || denom.abs() < 1e-14 * (r * r + dt * dt) {
        return Err(Error::Pole { s: dt, bounce: r });
    }
    Ok(1.0 / (2.0 * PI * PI * denom))
}

/// One symmetric image-sum term pair: Re 1/(r^2 - (dt + i k beta)^2), doubled
/// for +-k. Real arithmetic: denominator (A + k^2 b^2) + 2 i dt k b.
fn thermal_pair(a_sq: f64, dt: f64, kb: f64) -> f64 {
    let re = a_sq + kb * kb;
    let im = 2.0 * dt * kb;
    2.0 * re / (re * re + im * im)
}

/// Sum_{k > K} k^{-p} by Euler-Maclaurin.
fn zeta_tail(p: f64, k: usize) -> f64 {
    let kk = k as f64;
    kk.powf(1.0 - p) / (p - 1.0) - 0.5 * kk.powf(-p) + p * kk.powf(-p - 1.0) / 12.0
        - p * (p + 1.0) * (p + 2.0) * kk.powf(-p - 3.0) / 720.0
}

/// Finite-temperature Hadamard function as the imaginary-time image sum
/// Sum_k G_H(dt + i k beta, r), truncated at |k| <= k_max with an analytic
/// Euler-Maclaurin tail correction. Reduces to `hadamard_vacuum` for
/// infinite beta.
pub fn hadamard_thermal(dt: f64, r: f64, beta: InverseTemperature, cfg: &ThermalConfig) -> Result<f64> {
    cfg.validate()?;
    if !beta.is_finite() {
        return hadamard_vacuum(dt, r);
    }
    let b = beta.value();
    let a_sq = r * r - dt * dt;
    if a_sq == 0.0 || a_sq.abs() < 1e-14 * (r * r + dt * dt) {
        return Err(Error::Pole { s: dt, bounce: r });
    }
    let mut total = 1.0 / a_sq;
    for k in 1..=cfg.k_max {
        total += thermal_pair(a_sq, dt, k as f64 * b);
    }
    // tail of the 1/k^2 image sum, expanded to O(k^-6)
    let b2 = b * b;
    let dt2 = dt * dt;
    let c2 = 2.0 / b2;
    let c4 = -2.0 * (a_sq + 4.0 * dt2) / (b2 * b2);
    let c6 = 2.0 * (a_sq * a_sq + 12.0 * a_sq * dt2 + 16.0 * dt2 * dt2) / (b2 * b2 * b2);
    let tail = c2 * zeta_tail(2.0, cfg.k_max) + c4 * zeta_tail(4.0, cfg.k_max) + c6 * zeta_tail(6.0, cfg.k_max);
    // next-order residual estimate (k^-8 scale)
    let c8_scale = 2.0 * (a_sq.abs() + 4.0 * dt2).powi(3) / b2.powi(4) + 2.0 / b2 * (1.0 / b2).powi(3);
    let residual = c8_scale * zeta_tail(8.0, cfg.k_max) / (2.0 * PI * PI);
    if residual.abs() > cfg.sum_tol {
        return Err(Error::Truncation { tail: residual.abs(), tol: cfg.sum_tol, k_max: cfg.k_max });
    }
    Ok((total + tail) / (2.0 * PI * PI))
}

/// Retarded Green's function of the internal oscillator:
/// theta(s) sin(Omega s) / (m Omega).
pub fn oscillator_g_ret(s: f64, p: &AtomParams) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (p.omega * s).sin() / (p.m * p.omega)
    }
}

/// Hadamard Green's function of the internal oscillator at inverse
/// temperature beta_bar: coth(beta_bar Omega / 2) cos(Omega s) / (m Omega).
pub fn oscillator_g_h(s: f64, p: &AtomParams, beta_bar: InverseTemperature) -> Result<f64> {
    let coth = thermal_coth_factor(beta_bar, p.omega)?;
    Ok(coth * (p.omega * s).cos() / (p.m * p.omega))
}

/// n-th derivative of G(sigma) = 1/(4 pi^2 sigma): (-1)^n n! / (4 pi^2 sigma^(n+1)).
pub(crate) fn g_sigma_deriv(sigma: f64, n: u32) -> f64 {
    let mut fact = 1.0;
    for k in 2..=n {
        fact *= k as f64;
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * fact / (4.0 * PI * PI * sigma.powi(n as i32 + 1))
}

/// Complex version for imaginary-time image terms.
pub(crate) fn g_sigma_deriv_c(sigma: (f64, f64), n: u32) -> (f64, f64) {
    let mut fact = 1.0;
    for k in 2..=n {
        fact *= k as f64;
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    // sigma^(n+1)
    let (mut pr, mut pi) = (1.0, 0.0);
    for _ in 0..=n {
        let nr = pr * sigma.0 - pi * sigma.1;
        let ni = pr * sigma.1 + pi * sigma.0;
        pr = nr;
        pi = ni;
    }
    let d = pr * pr + pi * pi;
    (sign * fact * pr / (4.0 * PI * PI * d), -sign * fact * pi / (4.0 * PI * PI * d))
}

/// Mirror-image part of the symmetric electric-field two-point tensor for two
/// points on the static trajectory at height z with time separation s:
/// diagonal with K_xx = K_yy = s^2 G'' - 2 G' and K_zz = (4z^2 - s^2) G'' + 2 G'
/// evaluated at sigma~ = (4 z^2 - s^2)/2. Thermal states add the imaginary-time
/// image sum.
pub fn efield_image_correlator(
    z: f64,
    s: f64,
    beta: InverseTemperature,
    cfg: &ThermalConfig,
) -> Result<[[f64; 3]; 3]> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("efield_image_correlator requires z > 0, got {z}")));
    }
    let bounce = 2.0 * z;
    if (s.abs() - bounce).abs() < 1e-12 * bounce {
        return Err(Error::Pole { s, bounce });
    }
    let sigma = 0.5 * (4.0 * z * z - s * s);
    let g1 = g_sigma_deriv(sigma, 1);
    let g2 = g_sigma_deriv(sigma, 2);
    let mut k_xx = s * s * g2 - 2.0 * g1;
    let mut k_zz = (4.0 * z * z - s * s) * g2 + 2.0 * g1;

    if beta.is_finite() {
        let b = beta.value();
        let mut k = 1usize;
        loop {
            // s_k = s + i k beta; sigma_k = (4z^2 - s_k^2)/2
            let kb = k as f64 * b;
            let sk2 = (s * s - kb * kb, 2.0 * s * kb);
            let sig = (0.5 * (4.0 * z * z - sk2.0), -0.5 * sk2.1);
            let g1c = g_sigma_deriv_c(sig, 1);
            let g2c = g_sigma_deriv_c(sig, 2);
            // K_xx term: s_k^2 G'' - 2 G'; take 2 Re for the +-k pair
            let dxx = 2.0 * (sk2.0 * g2c.0 - sk2.1 * g2c.1 - 2.0 * g1c.0);
            let dzz = 2.0 * ((4.0 * z * z - sk2.0) * g2c.0 + sk2.1 * g2c.1 + 2.0 * g1c.0);
            k_xx += dxx;
            k_zz += dzz;
            let scale = k_xx.abs().max(k_zz.abs()).max(1e-300);
            if (dxx.abs() + dzz.abs()) < cfg.sum_tol * scale {
                break;
            }
            k += 1;
            if k > cfg.k_max.max(512) {
                return Err(Error::Truncation {
                    tail: dxx.abs() + dzz.abs(),
                    tol: cfg.sum_tol,
                    k_max: cfg.k_max.max(512),
                });
            }
        }
    }

    Ok([[k_xx, 0.0, 0.0], [0.0, k_xx, 0.0], [0.0, 0.0, k_zz]])
}

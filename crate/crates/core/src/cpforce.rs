//! Static Casimir-Polder force on an atom near a perfect mirror: closed
//! forms, asymptotics, thermal corrections, force gradients, and an
//! independent quadrature oracle built from the pre-integration worldline
//! form.
//!
//! The total vacuum force in the long-time limit is
//!
//! ```text
//! F(z) = -(q^2 / (32 pi^2 m Omega z^4)) * B(2 Omega z),
//! B(x) = 4x + (6 - 3x^2) f(x) + (6x - x^3) g(x),
//! ```
//!
//! with the standard auxiliary functions f, g. Its x -> 0 limit is the
//! electrostatic image law -3q^2/(32 pi m Omega z^4) and its x -> infinity
//! limit the retarded law -3q^2/(8 pi^2 m Omega^2 z^5), both exactly. The
//! retarded part F1 below is the expansion of the anticommutator operator
//! form; the dispersive part is total minus retarded, whose oscillatory
//! content cancels F1's at large distance.

use crate::error::{Error, Result};
use crate::greens::g_sigma_deriv;
use crate::params::{AtomParams, InverseTemperature, ThermalConfig};
use crate::quad::{adaptive_simpson, integrate_segments, oscillatory_tail};
use crate::specfun::{aux_f, aux_fg, thermal_coth_factor};

const PI: f64 = std::f64::consts::PI;

/// CP force split into retarded, dispersive and thermal pieces; the total is
/// the exact sum of the four components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceBreakdown {
    pub z: f64,
    /// Retarded (electrostatic-image) part F1.
    pub f_cp1: f64,
    /// Dispersive part F2 (vacuum).
    pub f_cp2: f64,
    /// Oscillator-temperature correction (coth(beta_bar Omega/2) - 1) F1.
    pub f_thermal_osc: f64,
    /// Field-temperature correction to the dispersive part.
    pub f_thermal_field: f64,
    pub total: f64,
}

impl ForceBreakdown {
    fn assemble(z: f64, f_cp1: f64, f_cp2: f64, f_thermal_osc: f64, f_thermal_field: f64) -> Self {
        Self {
            z,
            f_cp1,
            f_cp2,
            f_thermal_osc,
            f_thermal_field,
            total: f_cp1 + f_cp2 + f_thermal_osc + f_thermal_field,
        }
    }
}

fn check_z(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("mirror distance must be positive, got {z}")))
    }
}

/// Static polarizability alpha = q^2 / (4 pi m Omega^2).
pub fn static_polarizability(p: &AtomParams) -> f64 {
    p.q * p.q / (4.0 * PI * p.m * p.omega * p.omega)
}

/// Retarded part of the CP force (z-component), long-time limit:
/// (q^2/(128 pi m Omega)) [16 W^3 s/z + 24 W^2 c/z^2 - 24 W s/z^3 - 12 c/z^4]
/// with s = sin 2Wz, c = cos 2Wz.
pub fn cp_force_retarded(z: f64, p: &AtomParams) -> Result<f64> {
    check_z(z)?;
    let w = p.omega;
    let (s, c) = (2.0 * w * z).sin_cos();
    Ok(p.q * p.q / (128.0 * PI * p.m * w)
        * (16.0 * w.powi(3) * s / z + 24.0 * w * w * c / (z * z)
            - 24.0 * w * s / z.powi(3)
            - 12.0 * c / z.powi(4)))
}

/// d/dz of the retarded part.
fn cp_force_retarded_gradient(z: f64, p: &AtomParams) -> f64 {
    let w = p.omega;
    let (s, c) = (2.0 * w * z).sin_cos();
    p.q * p.q / (128.0 * PI * p.m * w)
        * ((-64.0 * w.powi(3) / (z * z) + 96.0 * w / z.powi(4)) * s
            + (32.0 * w.powi(4) / z - 96.0 * w * w / z.powi(3) + 48.0 / z.powi(5)) * c)
}

/// The dispersive bracket B(x) = 4x + (6 - 3x^2) f(x) + (6x - x^3) g(x).
///
/// B(0+) = 3 pi and B(x) -> 24/x for large x.
pub fn dispersive_bracket(x: f64) -> Result<f64> {
    let (f, g) = aux_fg(x)?;
    Ok(4.0 * x + (6.0 - 3.0 * x * x) * f + (6.0 * x - x * x * x) * g)
}

/// B'(x) = x^2 - 2 - x^3 f(x), from f' = -g and g' = f - 1/x.
fn dispersive_bracket_deriv(x: f64) -> Result<f64> {
    Ok(x * x - 2.0 - x * x * x * aux_f(x)?)
}

/// Total vacuum CP force in closed form (long time).
fn total_closed(z: f64, p: &AtomParams) -> Result<f64> {
    let x = 2.0 * p.omega * z;
    Ok(-p.q * p.q / (32.0 * PI * PI * p.m * p.omega * z.powi(4)) * dispersive_bracket(x)?)
}

/// Dispersive part of the CP force: the Hadamard-sourced piece, equal to the
/// closed-form total minus the retarded part. Oscillatory at large distance
/// (where it cancels F1's oscillation in the total), ~ z^-3 in the near field.
pub fn cp_force_dispersive(z: f64, p: &AtomParams) -> Result<f64> {
    check_z(z)?;
    Ok(total_closed(z, p)? - cp_force_retarded(z, p)?)
}

/// Full vacuum breakdown, long-time limit.
pub fn cp_force_total(z: f64, p: &AtomParams) -> Result<ForceBreakdown> {
    let f1 = cp_force_retarded(z, p)?;
    let f2 = cp_force_dispersive(z, p)?;
    Ok(ForceBreakdown::assemble(z, f1, f2, 0.0, 0.0))
}

/// Near-field (electrostatic image) asymptote -3 q^2 / (32 pi m Omega z^4).
pub fn cp_force_near_asymptote(z: f64, p: &AtomParams) -> Result<f64> {
    check_z(z)?;
    Ok(-3.0 * p.q * p.q / (32.0 * PI * p.m * p.omega * z.powi(4)))
}

/// Far-field (retarded) asymptote -3 q^2 / (8 pi^2 m Omega^2 z^5).
pub fn cp_force_far_asymptote(z: f64, p: &AtomParams) -> Result<f64> {
    check_z(z)?;
    Ok(-3.0 * p.q * p.q / (8.0 * PI * PI * p.m * p.omega * p.omega * z.powi(5)))
}

/// Oscillator-temperature retarded force coth(beta_bar Omega / 2) F1.
pub fn cp_force_thermal_retarded(z: f64, p: &AtomParams, beta_bar: InverseTemperature) -> Result<f64> {
    Ok(thermal_coth_factor(beta_bar, p.omega)? * cp_force_retarded(z, p)?)
}

/// Matsubara integrand h(xi) = [xi^3/z + 3 xi^2/(2z^2) + 3 xi/(2z^3)
/// + 3/(4z^4)] e^{-2 xi z} / (Omega^2 + xi^2).
fn matsubara_term(xi: f64, z: f64, omega: f64) -> f64 {
    let poly = xi.powi(3) / z + 1.5 * xi * xi / (z * z) + 1.5 * xi / z.powi(3) + 0.75 / z.powi(4);
    poly * (-2.0 * xi * z).exp() / (omega * omega + xi * xi)
}

fn matsubara_term_dz(xi: f64, z: f64, omega: f64) -> f64 {
    let poly = xi.powi(3) / z + 1.5 * xi * xi / (z * z) + 1.5 * xi / z.powi(3) + 0.75 / z.powi(4);
    let dpoly = -xi.powi(3) / (z * z) - 3.0 * xi * xi / z.powi(3) - 4.5 * xi / z.powi(4) - 3.0 / z.powi(5);
    (dpoly - 2.0 * xi * poly) * (-2.0 * xi * z).exp() / (omega * omega + xi * xi)
}

/// Smooth (non-oscillatory) part of the thermal force: the Matsubara sum
/// -(q^2/(4 pi^2 m)) (2 pi / beta) sum'_{n>=0} h(2 pi n / beta). Reduces to
/// the imaginary-frequency integral (the closed-form total) as beta -> inf.
fn thermal_smooth(z: f64, p: &AtomParams, beta: f64) -> f64 {
    let step = 2.0 * PI / beta;
    let mut acc = 0.5 * matsubara_term(0.0, z, p.omega);
    let mut n = 1usize;
    loop {
        let xi = step * n as f64;
        let t = matsubara_term(xi, z, p.omega);
        acc += t;
        if (2.0 * xi * z > 40.0 && n > 2) || t.abs() < 1e-18 * acc.abs() {
            break;
        }
        n += 1;
    }
    -(p.q * p.q / (4.0 * PI * PI * p.m)) * step * acc
}

fn thermal_smooth_gradient(z: f64, p: &AtomParams, beta: f64) -> f64 {
    let step = 2.0 * PI / beta;
    let mut acc = 0.5 * matsubara_term_dz(0.0, z, p.omega);
    let mut n = 1usize;
    loop {
        let xi = step * n as f64;
        let t = matsubara_term_dz(xi, z, p.omega);
        acc += t;
        if (2.0 * xi * z > 40.0 && n > 2) || t.abs() < 1e-18 * acc.abs() {
            break;
        }
        n += 1;
    }
    -(p.q * p.q / (4.0 * PI * PI * p.m)) * step * acc
}

/// Total vacuum force via the imaginary-frequency integral
/// -(q^2/4 pi^2 m) int_0^inf h(xi) d xi; an independent route to the closed
/// bracket form, used as a cross-check oracle.
pub fn cp_force_total_imagfreq(z: f64, p: &AtomParams) -> Result<f64> {
    check_z(z)?;
    let w = p.omega;
    let cut = 40.0 / (2.0 * z);
    let pts = [0.0, 0.5 * w, w, 2.0 * w, (4.0 * w).min(cut * 0.5), cut * 0.5, cut];
    let mut pts: Vec<f64> = pts.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let scale = matsubara_term(1.0 / (2.0 * z), z, w).abs().max(matsubara_term(w, z, w).abs());
    let integral = integrate_segments(|xi| matsubara_term(xi, z, w), &pts, 1e-13 * scale.max(1e-280))?;
    Ok(-(p.q * p.q / (4.0 * PI * PI * p.m)) * integral)
}

/// Closed-form (Matsubara) thermal dispersive force:
/// F2(beta) = -coth(beta Omega/2) F1 + smooth(beta).
pub fn cp_force_thermal_dispersive_closed(z: f64, p: &AtomParams, beta: InverseTemperature) -> Result<f64> {
    check_z(z)?;
    if !beta.is_finite() {
        return cp_force_dispersive(z, p);
    }
    let coth = thermal_coth_factor(beta, p.omega)?;
    Ok(-coth * cp_force_retarded(z, p)? + thermal_smooth(z, p, beta.value()))
}

/// Full thermal breakdown from the closed forms. At equal temperatures the
/// oscillatory retarded/dispersive pieces cancel and the total is the smooth
/// Matsubara part alone.
pub fn cp_force_total_thermal(z: f64, p: &AtomParams, thermal: &ThermalConfig) -> Result<ForceBreakdown> {
    let f1 = cp_force_retarded(z, p)?;
    let f2 = cp_force_dispersive(z, p)?;
    let coth_bar = thermal_coth_factor(thermal.beta_bar, p.omega)?;
    let f_osc = (coth_bar - 1.0) * f1;
    let f_field = if thermal.beta.is_finite() {
        cp_force_thermal_dispersive_closed(z, p, thermal.beta)? - f2
    } else {
        0.0
    };
    Ok(ForceBreakdown::assemble(z, f1, f2, f_osc, f_field))
}

/// Analytic d/dz of the thermal total force, validated against Richardson
/// finite differences in tests.
pub fn cp_force_gradient(z: f64, p: &AtomParams, thermal: &ThermalConfig) -> Result<f64> {
    check_z(z)?;
    let w = p.omega;
    let coth_bar = thermal_coth_factor(thermal.beta_bar, w)?;
    let smooth_grad = if thermal.beta.is_finite() {
        thermal_smooth_gradient(z, p, thermal.beta.value())
    } else {
        // vacuum: d/dz of the bracket form
        let x = 2.0 * w * z;
        -(p.q * p.q / (32.0 * PI * PI * p.m * w))
            * (2.0 * w * dispersive_bracket_deriv(x)? / z.powi(4) - 4.0 * dispersive_bracket(x)? / z.powi(5))
    };
    let coth_field = thermal_coth_factor(thermal.beta, w)?;
    Ok((coth_bar - coth_field) * cp_force_retarded_gradient(z, p) + smooth_grad)
}

// ---------------------------------------------------------------------------
// quadrature oracle
// ---------------------------------------------------------------------------

/// Sparse polynomial-times-trig representation sum_j c_j s^p_j {cos,sin}(W s),
/// closed under d/ds and division by s; used to evaluate the retarded
/// boundary operator ((1/s) d/ds)^3 exactly at runtime.
#[derive(Clone, Default)]
struct TrigPoly {
    /// (coefficient, power) pairs multiplying cos(W s).
    cos: Vec<(f64, i32)>,
    /// pairs multiplying sin(W s).
    sin: Vec<(f64, i32)>,
}

impl TrigPoly {
    fn push(list: &mut Vec<(f64, i32)>, c: f64, p: i32) {
        if c == 0.0 {
            return;
        }
        if let Some(e) = list.iter_mut().find(|e| e.1 == p) {
            e.0 += c;
        } else {
            list.push((c, p));
        }
    }

    /// (1/s) d/ds applied once.
    fn lower(&self, w: f64) -> Self {
        let mut out = Self::default();
        for &(c, p) in &self.cos {
            Self::push(&mut out.cos, c * p as f64, p - 2);
            Self::push(&mut out.sin, -c * w, p - 1);
        }
        for &(c, p) in &self.sin {
            Self::push(&mut out.sin, c * p as f64, p - 2);
            Self::push(&mut out.cos, c * w, p - 1);
        }
        out
    }

    fn eval(&self, s: f64, w: f64) -> f64 {
        let (sn, cs) = (w * s).sin_cos();
        let mut v = 0.0;
        for &(c, p) in &self.cos {
            v += c * s.powi(p) * cs;
        }
        for &(c, p) in &self.sin {
            v += c * s.powi(p) * sn;
        }
        v
    }
}

/// Retarded piece of the oracle: (q^2 z /(4 pi m W)) ((1/s) d/ds)^3
/// [(s^2 + 4 z^2) cos(W s)/s] at s = 2z, derived operationally at runtime.
fn oracle_retarded(z: f64, p: &AtomParams) -> f64 {
    let w = p.omega;
    let mut t = TrigPoly::default();
    TrigPoly::push(&mut t.cos, 1.0, 1); // s cos
    TrigPoly::push(&mut t.cos, 4.0 * z * z, -1); // 4 z^2 cos / s
    for _ in 0..3 {
        t = t.lower(w);
    }
    p.q * p.q * z / (4.0 * PI * p.m * w) * t.eval(2.0 * z, w)
}

/// Taylor coefficients of V(s) = [-(1/s) d/ds]^3 [(s^2+4z^2) sin(W s)/s]
/// about s = 0: V = sum_j s^(2j) (CZ_j W^(2j+7) z^2 + C0_j W^(2j+5)).
const V_CZ: [f64; 8] = [
    4.0 / 105.0,
    -2.0 / 945.0,
    1.0 / 20790.0,
    -1.0 / 1621620.0,
    1.0 / 194594400.0,
    -1.0 / 33081048000.0,
    1.0 / 7542478944000.0,
    -1.0 / 2217488809536000.0,
];
const V_C0: [f64; 8] = [
    -2.0 / 5.0,
    4.0 / 105.0,
    -1.0 / 756.0,
    1.0 / 41580.0,
    -1.0 / 3706560.0,
    1.0 / 486486000.0,
    -1.0 / 88216128000.0,
    1.0 / 21118941043200.0,
];

fn v_weight(s: f64, z: f64, w: f64) -> f64 {
    if w * s <= 1.0 {
        let s2 = s * s;
        let mut acc = 0.0;
        let mut pw = 1.0;
        let mut w7 = w.powi(7);
        let mut w5 = w.powi(5);
        for j in 0..8 {
            acc += pw * (V_CZ[j] * w7 * z * z + V_C0[j] * w5);
            pw *= s2;
            w7 *= w * w;
            w5 *= w * w;
        }
        acc
    } else {
        let (sn, cs) = (w * s).sin_cos();
        (-24.0 * w * w * z * z / s.powi(5) - 3.0 / s.powi(5) + 60.0 * z * z / s.powi(7)) * sn
            + (w.powi(3) / (s * s) + 4.0 * w.powi(3) * z * z / s.powi(4) + 3.0 * w / s.powi(4)
                - 60.0 * w * z * z / s.powi(6))
                * cs
    }
}

/// s = 0 boundary term of the u-space integration by parts:
/// W G'' - W_u G' + W_uu G at u = 2 z^2, closed form.
fn oracle_boundary(z: f64, w: f64) -> f64 {
    w * (4.0 * w.powi(4) * z.powi(4) - 10.0 * w * w * z * z + 15.0) / (120.0 * PI * PI * z.powi(4))
}

/// Boundary terms at a finite upper limit s = tau (for the transient oracle).
fn oracle_boundary_upper(tau: f64, z: f64, w: f64) -> f64 {
    let s = tau;
    let (sn, cs) = (w * s).sin_cos();
    let wv = (s + 4.0 * z * z / s) * sn;
    let ws = (1.0 - 4.0 * z * z / (s * s)) * sn + (s + 4.0 * z * z / s) * w * cs;
    let wss = (8.0 * z * z / s.powi(3) - w * w * (s + 4.0 * z * z / s)) * sn
        + 2.0 * w * (1.0 - 4.0 * z * z / (s * s)) * cs;
    let wu = -ws / s;
    let wuu = wss / (s * s) - ws / s.powi(3);
    let sig = 2.0 * z * z - s * s / 2.0;
    wv * g_sigma_deriv(sig, 2) - wu * g_sigma_deriv(sig, 1) + wuu / (4.0 * PI * PI * sig)
}

/// P.V. integral int_0^{s_max} V(s) s / (4 pi^2 sigma~(s)) ds with the
/// light-bounce pole at s = 2z subtracted on a symmetric window.
fn oracle_pv_integral(z: f64, p: &AtomParams, s_max: f64, tol: f64) -> Result<f64> {
    let w = p.omega;
    let a = 2.0 * z;
    let period = PI / w;
    let integrand = |s: f64| {
        let sig = 2.0 * z * z - s * s / 2.0;
        v_weight(s, z, w) * s / (4.0 * PI * PI * sig)
    };

    if s_max <= a * (1.0 - 1e-9) {
        // transient regime before the bounce: no pole in range
        let mut pts = vec![0.0, (1.0 / w).min(s_max)];
        let mut k = 1;
        while k as f64 * period < s_max {
            pts.push(k as f64 * period);
            k += 1;
        }
        pts.push(s_max);
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        pts.dedup();
        return integrate_segments(integrand, &pts, tol);
    }

    let delta = 0.5 * (1.0 / w).min(a / 2.0);
    // [0, a - delta]
    let mut pts = vec![0.0, (1.0 / w).min(a - delta)];
    let mut k = 1;
    while (k as f64) * period < a - delta {
        pts.push(k as f64 * period);
        k += 1;
    }
    pts.push(a - delta);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let i_pre = integrate_segments(integrand, &pts, tol)?;

    // symmetric window [a - delta, a + delta] with the simple pole removed:
    // integrand = phi(s)/(s - a), phi = -V(s) s / (2 pi^2 (s + a))
    let phi = |s: f64| -v_weight(s, z, w) * s / (2.0 * PI * PI * (s + a));
    let phi_a = phi(a);
    let h = 1e-5 * a;
    let slope = (phi(a + h) - phi(a - h)) / (2.0 * h);
    let window = adaptive_simpson(
        |u: f64| {
            if u.abs() < 1e-9 * a {
                slope
            } else {
                (phi(a + u) - phi_a) / u
            }
        },
        -delta,
        delta,
        tol,
    )?;

    // bridge to the period grid, then sum oscillatory blocks
    let s0 = a + delta;
    let k0 = (s0 / period).ceil() as usize;
    let bridge = if (k0 as f64) * period > s0 {
        adaptive_simpson(integrand, s0, k0 as f64 * period, tol)?
    } else {
        0.0
    };
    let tail = if s_max.is_finite() {
        let mut acc = 0.0;
        let mut k = k0;
        while (k as f64) * period < s_max {
            let hi = ((k + 1) as f64 * period).min(s_max);
            acc += adaptive_simpson(integrand, k as f64 * period, hi, tol)?;
            k += 1;
        }
        acc
    } else {
        oscillatory_tail(integrand, k0 as f64 * period, period, tol, 200_000)?
    };
    Ok(i_pre + window + bridge + tail)
}

fn oracle_dispersive_vacuum(z: f64, p: &AtomParams, tau: f64, tol: f64) -> Result<f64> {
    let w = p.omega;
    let upper = if tau.is_finite() { oracle_boundary_upper(tau, z, w) } else { 0.0 };
    let pv = oracle_pv_integral(z, p, tau, tol)?;
    Ok(p.q * p.q * z / (p.m * w) * (oracle_boundary(z, w) - upper - pv))
}

/// k != 0 imaginary-time image contribution to the thermal dispersive force.
fn oracle_dispersive_thermal_images(z: f64, p: &AtomParams, beta: f64, tol: f64) -> Result<f64> {
    let w = p.omega;
    let period = PI / w;
    let mut total = 0.0;
    for k in 1..100_000usize {
        let kb = k as f64 * beta;
        let term_integrand = |s: f64| {
            // s_k = s + i k beta; sigma_k = (4 z^2 - s_k^2)/2
            let sk2 = (s * s - kb * kb, 2.0 * s * kb);
            let sig = (0.5 * (4.0 * z * z - sk2.0), -0.5 * sk2.1);
            let g3 = crate::greens::g_sigma_deriv_c(sig, 3);
            // 2 Re[ 2z (s_k^2 + 4z^2) G'''(sigma_k) ] sin(W s)
            let re = 2.0
                * (2.0 * z)
                * ((sk2.0 + 4.0 * z * z) * g3.0 - sk2.1 * g3.1);
            re * (w * s).sin()
        };
        let head = integrate_segments(term_integrand, &[0.0, period, 2.0 * period, 4.0 * period], tol)?;
        let tail = oscillatory_tail(term_integrand, 4.0 * period, period, tol, 100_000)?;
        let term = (p.q * p.q / (2.0 * p.m * w)) * (head + tail);
        total += term;
        if term.abs() < tol * total.abs().max(1e-30) && k >= 2 {
            break;
        }
    }
    Ok(total)
}

/// Field-temperature dispersive force by principal-value quadrature of the
/// thermal image Hadamard kernel (long-time limit). beta = infinity reduces
/// to the vacuum dispersive force within quadrature tolerance.
pub fn cp_force_thermal_dispersive(
    z: f64,
    p: &AtomParams,
    beta: InverseTemperature,
    cfg: &ThermalConfig,
) -> Result<f64> {
    check_z(z)?;
    cfg.validate()?;
    let tol = 1e-11 * oracle_boundary(z, p.omega).abs().max(1e-280);
    let vac = oracle_dispersive_vacuum(z, p, f64::INFINITY, tol)?;
    if !beta.is_finite() {
        return Ok(vac);
    }
    Ok(vac + oracle_dispersive_thermal_images(z, p, beta.value(), tol)?)
}

/// Worldline quadrature oracle for the CP force: evaluates the
/// pre-integration s-integral numerically. The retarded delta-supported part
/// reduces to a boundary evaluation at s = 2z (present only once the image
/// signal has arrived, tau > 2z); the Hadamard part is a pole-subtracted
/// principal-value quadrature.
pub fn cp_force_quadrature_oracle(
    z: f64,
    tau: f64,
    p: &AtomParams,
    thermal: &ThermalConfig,
) -> Result<ForceBreakdown> {
    check_z(z)?;
    p.validate()?;
    thermal.validate()?;
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    let tol = 1e-11 * oracle_boundary(z, p.omega).abs().max(1e-280);

    let coth_bar = thermal_coth_factor(thermal.beta_bar, p.omega)?;
    let f1 = if tau > 2.0 * z { oracle_retarded(z, p) } else { 0.0 };
    let f_osc = (coth_bar - 1.0) * f1;

    let f2 = oracle_dispersive_vacuum(z, p, tau, tol)?;
    let f_field = if thermal.beta.is_finite() {
        if tau.is_finite() {
            return Err(Error::Quadrature(
                "finite-tau thermal oracle not supported; use the long-time limit".into(),
            ));
        }
        oracle_dispersive_thermal_images(z, p, thermal.beta.value(), tol)?
    } else {
        0.0
    };
    Ok(ForceBreakdown::assemble(z, f1, f2, f_osc, f_field))
}

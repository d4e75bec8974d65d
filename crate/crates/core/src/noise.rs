//! Colored noise kernel of the atom's Langevin equation: the mirror-induced
//! part of the symmetric force-force correlator, its stationary covariance on
//! a time grid, and deterministic Gaussian sampling.
//!
//! The correlation factorizes as C_kk(s) = (q^2/2) g_H(s) M_kk(z, s) with the
//! oscillator Hadamard kernel g_H and a spatial factor M from four
//! derivatives of the image Green's function. M is diagonal with
//! M_xx = M_yy; the kernel is even in the lag and scales as lambda^-6 under
//! (z, s) -> (lambda z, lambda s).
//!
//! Two kernel forms are supported. `Full` is the physical image correlator,
//! whose principal-value ridge at the light bounce |s| = 2z makes the lag
//! spectrum strongly sign-indefinite; it is kept as a signed split
//! C = C+ - C-. `Smooth` reflects the bounce pole terms to s = -2z, which
//! removes the ridge oscillation while preserving the coincidence values and
//! the response that carries the far-field dispersion law; its spectrum is
//! positive up to numerical dust and it is the form the dispersion
//! experiment samples.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{AtomParams, ThermalConfig, TimeGrid};
use crate::specfun::thermal_coth_factor;

const PI: f64 = std::f64::consts::PI;

/// Which lag-domain kernel backs the covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelForm {
    /// Physical image correlator with the light-bounce ridge (regularized
    /// with a Lorentzian width eps).
    Full,
    /// Bounce-free kernel: pole terms reflected off the integration range.
    Smooth,
}

/// Transverse spatial factor of the full image kernel at complex lag.
fn m_xx_full_c(z: f64, s: Complex64) -> f64 {
    let s2 = s * s;
    let d = s2 - 4.0 * z * z;
    (8.0 * (s2 + 20.0 * z * z) / (PI * PI * d.powi(4))).re
}

/// Normal spatial factor of the full image kernel at complex lag.
fn m_zz_full_c(z: f64, s: Complex64) -> f64 {
    let s2 = s * s;
    let d = s2 - 4.0 * z * z;
    let num = 768.0 * z * z * (s2 + 4.0 * z * z) + 24.0 * d * (s2 + 12.0 * z * z);
    (-num / (PI * PI * d.powi(5))).re
}

/// Bounce-free transverse factor (even in s).
fn m_xx_smooth(z: f64, s: f64) -> f64 {
    let a = 2.0 * z;
    let sa = s.abs() + a;
    2.0 * (3.0 * a.powi(3) + 5.0 * a * a * sa + 6.0 * a * sa * sa + 6.0 * sa.powi(3))
        / (PI * PI * a.powi(5) * sa.powi(4))
}

/// Bounce-free normal factor (even in s).
fn m_zz_smooth(z: f64, s: f64) -> f64 {
    let a = 2.0 * z;
    let sa = s.abs() + a;
    24.0 * (a.powi(4) + a.powi(3) * sa + a * a * sa * sa + a * sa.powi(3) + sa.powi(4))
        / (PI * PI * a.powi(5) * sa.powi(5))
}

fn check_inputs(z: f64, p: &AtomParams, thermal: &ThermalConfig) -> Result<()> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("mirror distance must be positive, got {z}")));
    }
    p.validate()?;
    thermal.validate()
}

/// Spatial factors (M_xx = M_yy, M_zz) with a Lorentzian shift eps and the
/// field-temperature imaginary-time image sum.
fn spatial_factors(z: f64, s: f64, eps: f64, thermal: &ThermalConfig, form: KernelForm) -> Result<(f64, f64)> {
    match form {
        KernelForm::Full => {
            let s0 = Complex64::new(s, eps);
            let mut xx = m_xx_full_c(z, s0);
            let mut zz = m_zz_full_c(z, s0);
            if thermal.beta.is_finite() {
                let b = thermal.beta.value();
                for k in 1..=thermal.k_max.max(256) {
                    let sk = Complex64::new(s, eps + k as f64 * b);
                    let skm = Complex64::new(s, eps - k as f64 * b);
                    let dxx = m_xx_full_c(z, sk) + m_xx_full_c(z, skm);
                    let dzz = m_zz_full_c(z, sk) + m_zz_full_c(z, skm);
                    xx += dxx;
                    zz += dzz;
                    if (dxx.abs() + dzz.abs()) < thermal.sum_tol * (xx.abs() + zz.abs()).max(1e-290) && k >= 2 {
                        return Ok((xx, zz));
                    }
                }
                return Err(Error::Truncation {
                    tail: thermal.sum_tol,
                    tol: thermal.sum_tol,
                    k_max: thermal.k_max.max(256),
                });
            }
            Ok((xx, zz))
        }
        KernelForm::Smooth => {
            if thermal.beta.is_finite() {
                return Err(Error::Domain(
                    "the bounce-free kernel supports only the vacuum field state".into(),
                ));
            }
            let _ = eps; // the smooth form has no pole to regularize
            Ok((m_xx_smooth(z, s), m_zz_smooth(z, s)))
        }
    }
}

/// Mirror-induced noise correlation matrix at lag s (full image kernel,
/// principal-value sense). Errors exactly on the light-bounce lag |s| = 2z;
/// grid sampling uses [`noise_correlation_regularized`].
pub fn noise_correlation(z: f64, s: f64, p: &AtomParams, thermal: &ThermalConfig) -> Result<[[f64; 3]; 3]> {
    check_inputs(z, p, thermal)?;
    if (s.abs() - 2.0 * z).abs() < 1e-12 * 2.0 * z {
        return Err(Error::Pole { s, bounce: 2.0 * z });
    }
    correlation_with(z, s, 0.0, p, thermal, KernelForm::Full)
}

/// Noise correlation with the Lorentzian pole regularization of width eps.
pub fn noise_correlation_regularized(
    z: f64,
    s: f64,
    eps: f64,
    p: &AtomParams,
    thermal: &ThermalConfig,
) -> Result<[[f64; 3]; 3]> {
    check_inputs(z, p, thermal)?;
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("regularization width must be positive, got {eps}")));
    }
    correlation_with(z, s, eps, p, thermal, KernelForm::Full)
}

/// Bounce-free noise correlation (see module docs).
pub fn noise_correlation_smooth(z: f64, s: f64, p: &AtomParams, thermal: &ThermalConfig) -> Result<[[f64; 3]; 3]> {
    check_inputs(z, p, thermal)?;
    correlation_with(z, s, 0.0, p, thermal, KernelForm::Smooth)
}

fn correlation_with(
    z: f64,
    s: f64,
    eps: f64,
    p: &AtomParams,
    thermal: &ThermalConfig,
    form: KernelForm,
) -> Result<[[f64; 3]; 3]> {
    let (xx, zz) = spatial_factors(z, s, eps, thermal, form)?;
    let coth = thermal_coth_factor(thermal.beta_bar, p.omega)?;
    let g_h = coth * (p.omega * s).cos() / (p.m * p.omega);
    let w = 0.5 * p.q * p.q * g_h;
    Ok([[w * xx, 0.0, 0.0], [0.0, w * xx, 0.0], [0.0, 0.0, w * zz]])
}

/// Options for [`build_covariance_with`].
#[derive(Debug, Clone, Copy)]
pub struct CovarianceOptions {
    pub form: KernelForm,
    /// Lorentzian pole width; defaults to dt/2.
    pub eps: Option<f64>,
    /// Eigenvalues with |lambda| below this fraction of the largest are
    /// clipped to zero as numerical dust.
    pub eig_floor: f64,
}

impl Default for CovarianceOptions {
    fn default() -> Self {
        Self { form: KernelForm::Smooth, eps: None, eig_floor: 1e-12 }
    }
}

/// One axis of the factorized covariance: C_axis = L+ L+^T - L- L-^T.
#[derive(Debug, Clone)]
pub struct AxisFactor {
    pub l_plus: DMatrix<f64>,
    pub l_minus: DMatrix<f64>,
    pub min_eigenvalue: f64,
    /// |clipped dust| / total |spectral mass|.
    pub clipped_mass: f64,
    /// genuine negative mass / total |spectral mass|.
    pub negative_fraction: f64,
}

/// Stationary noise covariance on a time grid, assembled as a (3n) x (3n)
/// block-Toeplitz matrix (3x3 block lattice, entry index 3 i + axis) plus a
/// factorized signed split per axis for sampling.
#[derive(Debug, Clone)]
pub struct NoiseCovariance {
    pub grid: TimeGrid,
    pub z: f64,
    pub form: KernelForm,
    pub eps: f64,
    pub eig_floor: f64,
    /// Diagonal correlation entries (xx, yy, zz) per lag 0..n-1.
    pub blocks: Vec<[f64; 3]>,
    /// Assembled signed covariance.
    pub matrix: DMatrix<f64>,
    pub axis_x: AxisFactor,
    pub axis_z: AxisFactor,
}

impl NoiseCovariance {
    pub fn clipped_mass(&self) -> f64 {
        self.axis_x.clipped_mass.max(self.axis_z.clipped_mass)
    }

    pub fn negative_fraction(&self) -> f64 {
        self.axis_x.negative_fraction.max(self.axis_z.negative_fraction)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.axis_x.min_eigenvalue.min(self.axis_z.min_eigenvalue)
    }
}

fn factor_axis(kernel: &[f64], eig_floor: f64) -> Result<AxisFactor> {
    let n = kernel.len();
    let mut toeplitz = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            toeplitz[(i, j)] = kernel[(i as isize - j as isize).unsigned_abs()];
        }
    }
    let eig = SymmetricEigen::new(toeplitz);
    let lam_max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let total: f64 = eig.eigenvalues.iter().map(|l| l.abs()).sum();
    let mut clipped = 0.0;
    let mut negative = 0.0;
    let mut min_ev = f64::INFINITY;
    let mut lp = DVector::zeros(n);
    let mut lm = DVector::zeros(n);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        min_ev = min_ev.min(l);
        if l.abs() < eig_floor * lam_max {
            clipped += l.abs();
        } else if l > 0.0 {
            lp[i] = l.sqrt();
        } else {
            negative += -l;
            lm[i] = (-l).sqrt();
        }
    }
    let scale = |d: &DVector<f64>| {
        let mut m = eig.eigenvectors.clone();
        for (j, col) in m.column_iter_mut().enumerate() {
            let mut col = col;
            col *= d[j];
        }
        m
    };
    Ok(AxisFactor {
        l_plus: scale(&lp),
        l_minus: scale(&lm),
        min_eigenvalue: min_ev,
        clipped_mass: if total > 0.0 { clipped / total } else { 0.0 },
        negative_fraction: if total > 0.0 { negative / total } else { 0.0 },
    })
}

/// Build the stationary covariance with default options (bounce-free kernel).
pub fn build_covariance(z: f64, grid: &TimeGrid, p: &AtomParams, thermal: &ThermalConfig) -> Result<NoiseCovariance> {
    build_covariance_with(z, grid, p, thermal, &CovarianceOptions::default())
}

/// Build the stationary covariance from `noise_correlation` sampled at lags
/// k dt, symmetrize, and factorize each axis with eigenvalue clipping at the
/// dust floor. Clipped mass above 1% of the spectral mass is an
/// ill-conditioning error.
pub fn build_covariance_with(
    z: f64,
    grid: &TimeGrid,
    p: &AtomParams,
    thermal: &ThermalConfig,
    opts: &CovarianceOptions,
) -> Result<NoiseCovariance> {
    check_inputs(z, p, thermal)?;
    grid.validate_resolution(p.omega, z)?;
    let eps = opts.eps.unwrap_or(grid.dt / 2.0);
    let n = grid.n;
    let mut kxx = Vec::with_capacity(n);
    let mut kzz = Vec::with_capacity(n);
    let mut blocks = Vec::with_capacity(n);
    for i in 0..n {
        let s = grid.dt * i as f64;
        let c = correlation_with(z, s, eps, p, thermal, opts.form)?;
        kxx.push(c[0][0]);
        kzz.push(c[2][2]);
        blocks.push([c[0][0], c[1][1], c[2][2]]);
    }

    let axis_x = factor_axis(&kxx, opts.eig_floor)?;
    let axis_z = factor_axis(&kzz, opts.eig_floor)?;

    let mut matrix = DMatrix::zeros(3 * n, 3 * n);
    for i in 0..n {
        for j in 0..n {
            let lag = (i as isize - j as isize).unsigned_abs();
            matrix[(3 * i, 3 * j)] = kxx[lag];
            matrix[(3 * i + 1, 3 * j + 1)] = kxx[lag];
            matrix[(3 * i + 2, 3 * j + 2)] = kzz[lag];
        }
    }

    let cov = NoiseCovariance {
        grid: *grid,
        z,
        form: opts.form,
        eps,
        eig_floor: opts.eig_floor,
        blocks,
        matrix,
        axis_x,
        axis_z,
    };
    if cov.clipped_mass() > 1e-2 {
        return Err(Error::IllConditioned { clipped: cov.clipped_mass(), limit: 1e-2 });
    }
    Ok(cov)
}

/// One sampled realization: per-axis series driven by the positive and
/// negative covariance parts. Statistics of (plus) minus statistics of
/// (minus) estimate the signed kernel response.
#[derive(Debug, Clone)]
pub struct NoiseRealization {
    pub plus: [Vec<f64>; 3],
    pub minus: [Vec<f64>; 3],
}

fn draw_axis(factor: &AxisFactor, rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let g = DVector::from_iterator(n, (0..n).map(|_| standard_normal(rng)));
    let plus = &factor.l_plus * &g;
    let g2 = DVector::from_iterator(n, (0..n).map(|_| standard_normal(rng)));
    let minus = &factor.l_minus * &g2;
    (plus.as_slice().to_vec(), minus.as_slice().to_vec())
}

pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per normal keeps the stream layout simple
    // and deterministic across platforms.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Draw `count` independent realizations; fully deterministic given
/// (seed, count, cov): realization t uses stream 2t for the positive part
/// and 2t + 1 for the negative part.
pub fn sample_noise(cov: &NoiseCovariance, seed: u64, count: usize) -> Vec<NoiseRealization> {
    (0..count).map(|t| sample_one(cov, seed, t)).collect()
}

/// Draw the t-th realization of the stream defined by `seed`.
pub fn sample_one(cov: &NoiseCovariance, seed: u64, t: usize) -> NoiseRealization {
    let n = cov.grid.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * t as u64);
    let (xp, xm) = draw_axis(&cov.axis_x, &mut rng, n);
    let (yp, ym) = draw_axis(&cov.axis_x, &mut rng, n);
    let mut rng2 = ChaCha8Rng::seed_from_u64(seed);
    rng2.set_stream(2 * t as u64 + 1);
    let (zp, zm) = draw_axis(&cov.axis_z, &mut rng2, n);
    NoiseRealization { plus: [xp, yp, zp], minus: [xm, ym, zm] }
}

/// Write the assembled covariance as CSV (row-major) with grid metadata in
/// '#' comment lines.
pub fn write_covariance_csv<W: Write>(cov: &NoiseCovariance, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "# covariance z={:.16e} n={} dt={:.16e} eps={:.16e} form={:?}",
        cov.z, cov.grid.n, cov.grid.dt, cov.eps, cov.form
    )?;
    writeln!(
        out,
        "# min_eigenvalue={:.16e} clipped_mass={:.16e} negative_fraction={:.16e}",
        cov.min_eigenvalue(),
        cov.clipped_mass(),
        cov.negative_fraction()
    )?;
    let dim = cov.matrix.nrows();
    for i in 0..dim {
        let row: Vec<String> = (0..dim).map(|j| format!("{:.16e}", cov.matrix[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Write sampled realizations as CSV: one row per time sample with the
/// signed series (plus minus minus) per axis.
pub fn write_realizations_csv<W: Write>(
    cov: &NoiseCovariance,
    realizations: &[NoiseRealization],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "# realizations count={} n={} dt={:.16e}", realizations.len(), cov.grid.n, cov.grid.dt)?;
    writeln!(out, "realization,t,xi_x,xi_y,xi_z")?;
    for (r, real) in realizations.iter().enumerate() {
        for i in 0..cov.grid.n {
            let t = cov.grid.t0 + cov.grid.dt * i as f64;
            writeln!(
                out,
                "{r},{t:.16e},{:.16e},{:.16e},{:.16e}",
                real.plus[0][i] - real.minus[0][i],
                real.plus[1][i] - real.minus[1][i],
                real.plus[2][i] - real.minus[2][i],
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::InverseTemperature;
    use approx::assert_relative_eq;

    fn unit() -> AtomParams {
        AtomParams::unit()
    }

    #[test]
    fn correlation_structure() {
        let p = unit();
        let vac = ThermalConfig::vacuum();
        for &(z, s) in &[(1.0, 0.4), (3.0, 2.0), (2.0, 7.0)] {
            let c = noise_correlation(z, s, &p, &vac).unwrap();
            let cm = noise_correlation(z, -s, &p, &vac).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert_eq!(c[i][j], 0.0);
                    }
                    assert_eq!(c[i][j], cm[i][j]);
                }
            }
            assert_eq!(c[0][0], c[1][1]);
        }
        assert!(noise_correlation(1.0, 2.0, &p, &vac).is_err());
    }

    #[test]
    fn correlation_scaling() {
        // C(lambda z, lambda s) = lambda^-6 C(z, s) at beta = beta_bar = inf
        // (the g_H cos factor breaks pure scaling; test the spatial factors)
        let (z, s) = (1.0, 0.7);
        let lam = 2.0;
        assert_relative_eq!(
            super::m_xx_full_c(lam * z, Complex64::new(lam * s, 0.0)),
            super::m_xx_full_c(z, Complex64::new(s, 0.0)) / lam.powi(6),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            super::m_zz_full_c(lam * z, Complex64::new(lam * s, 0.0)),
            super::m_zz_full_c(z, Complex64::new(s, 0.0)) / lam.powi(6),
            max_relative = 1e-12
        );
    }

    #[test]
    fn coincidence_values() {
        // M(0) = (5, 5, 15) / (8 pi^2 z^6), for both kernel forms
        let z: f64 = 3.0;
        let unit_v = 1.0 / (8.0 * PI * PI * z.powi(6));
        assert_relative_eq!(super::m_xx_full_c(z, Complex64::new(0.0, 0.0)), 5.0 * unit_v, max_relative = 1e-12);
        assert_relative_eq!(super::m_zz_full_c(z, Complex64::new(0.0, 0.0)), 15.0 * unit_v, max_relative = 1e-12);
        assert_relative_eq!(super::m_xx_smooth(z, 0.0), 5.0 * unit_v, max_relative = 1e-12);
        assert_relative_eq!(super::m_zz_smooth(z, 0.0), 15.0 * unit_v, max_relative = 1e-12);
    }

    #[test]
    fn spatial_factor_finite_difference_route() {
        // four nested central differences of the image Green's function
        // reproduce the closed forms (independent derivation route)
        let g = |a: [f64; 4], b: [f64; 4]| {
            let sig = 0.5
                * (-(a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
                    + (a[3] - b[3]).powi(2))
                + 2.0 * a[3] * b[3];
            1.0 / (4.0 * PI * PI * sig)
        };
        let (z, s) = (1.0, 0.7);
        let h = 2e-3;
        // Psi = -d0 d0' G + sum_m dm dm' G on general points, then dk dk'
        let psi = |x1: [f64; 4], x2: [f64; 4]| {
            let mut val = 0.0;
            for (mu, sign) in [(0usize, -1.0), (1, 1.0), (2, 1.0), (3, 1.0)] {
                for s1 in [1.0, -1.0] {
                    for s2 in [1.0, -1.0] {
                        let mut a = x1;
                        let mut b = x2;
                        a[mu] += s1 * h;
                        b[mu] += s2 * h;
                        val += sign * s1 * s2 * g(a, b);
                    }
                }
            }
            val / (4.0 * h * h)
        };
        let m_fd = |k: usize| {
            let mut tot = 0.0;
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    let mut a = [0.0, 0.0, 0.0, z];
                    let mut b = [-s, 0.0, 0.0, z];
                    a[k] += s1 * h;
                    b[k] += s2 * h;
                    tot += s1 * s2 * psi(a, b);
                }
            }
            tot / (4.0 * h * h)
        };
        assert_relative_eq!(m_fd(1), super::m_xx_full_c(z, Complex64::new(s, 0.0)), max_relative = 1e-3);
        assert_relative_eq!(m_fd(3), super::m_zz_full_c(z, Complex64::new(s, 0.0)), max_relative = 1e-3);
    }

    #[test]
    fn thermal_enhancement_at_zero_lag() {
        let p = unit();
        let z = 2.0;
        let base = noise_correlation(z, 0.0, &p, &ThermalConfig::vacuum()).unwrap();
        let trace = |c: [[f64; 3]; 3]| c[0][0] + c[1][1] + c[2][2];
        // oscillator temperature
        let mut prev = trace(base);
        for &bb in &[8.0, 2.0, 0.5] {
            let t = ThermalConfig::with_temperatures(InverseTemperature::VACUUM, InverseTemperature(bb));
            let v = trace(noise_correlation(z, 0.0, &p, &t).unwrap());
            assert!(v > prev);
            prev = v;
        }
        // field temperature: the image-part trace grows monotonically once
        // thermal occupation matters (beta Omega <~ 4); at very low
        // temperature the tiny image correction can dip slightly negative
        let mut prev = trace(base);
        for &b in &[4.0, 2.0, 1.0, 0.5] {
            let t = ThermalConfig::with_temperatures(InverseTemperature(b), InverseTemperature::VACUUM);
            let v = trace(noise_correlation(z, 0.0, &p, &t).unwrap());
            assert!(v > prev, "beta = {b}");
            prev = v;
        }
    }

    #[test]
    fn kernel_is_colored() {
        // the correlation at s = pi/Omega is not negligible vs s = 0
        let p = unit();
        let vac = ThermalConfig::vacuum();
        let z = 5.0;
        let c0 = noise_correlation(z, 0.0, &p, &vac).unwrap()[2][2];
        let c1 = noise_correlation(z, PI, &p, &vac).unwrap()[2][2];
        assert!((c1 / c0).abs() > 0.05, "kernel must be colored, got ratio {}", c1 / c0);
    }

    fn small_grid() -> TimeGrid {
        TimeGrid::new(0.0, 0.2, 96).unwrap()
    }

    #[test]
    fn covariance_structure_and_diagnostics() {
        let p = unit();
        let vac = ThermalConfig::vacuum();
        let cov = build_covariance(5.0, &small_grid(), &p, &vac).unwrap();
        // x and y blocks bit-identical, Toeplitz in the block lattice
        let n = cov.grid.n;
        for i in 0..n {
            for j in 0..n {
                assert_eq!(cov.matrix[(3 * i, 3 * j)], cov.matrix[(3 * i + 1, 3 * j + 1)]);
                let lag = (i as isize - j as isize).unsigned_abs();
                assert_eq!(cov.matrix[(3 * i + 2, 3 * j + 2)], cov.blocks[lag][2]);
            }
        }
        // smooth kernel: nearly PSD
        assert!(cov.clipped_mass() < 1e-3, "clipped mass {}", cov.clipped_mass());
        assert!(cov.negative_fraction() < 1e-3);

        // full kernel: honest diagnostics show the signed ridge content
        let opts = CovarianceOptions { form: KernelForm::Full, ..Default::default() };
        let cov_full = build_covariance_with(5.0, &small_grid(), &p, &vac, &opts).unwrap();
        assert!(cov_full.negative_fraction() > 0.05);
    }

    #[test]
    fn factorization_reconstructs_covariance() {
        let p = unit();
        let vac = ThermalConfig::vacuum();
        let cov = build_covariance(5.0, &small_grid(), &p, &vac).unwrap();
        let n = cov.grid.n;
        let rec = &cov.axis_z.l_plus * cov.axis_z.l_plus.transpose()
            - &cov.axis_z.l_minus * cov.axis_z.l_minus.transpose();
        let scale = cov.blocks[0][2].abs();
        for i in 0..n {
            for j in 0..n {
                let lag = (i as isize - j as isize).unsigned_abs();
                assert_relative_eq!(rec[(i, j)], cov.blocks[lag][2], epsilon = 1e-9 * scale);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = unit();
        let vac = ThermalConfig::vacuum();
        let cov = build_covariance(5.0, &small_grid(), &p, &vac).unwrap();
        let a = sample_noise(&cov, 42, 3);
        let b = sample_noise(&cov, 42, 3);
        for (x, y) in a.iter().zip(&b) {
            for ax in 0..3 {
                assert_eq!(x.plus[ax], y.plus[ax]);
                assert_eq!(x.minus[ax], y.minus[ax]);
            }
        }
        let c = sample_noise(&cov, 43, 1);
        assert_ne!(a[0].plus[0], c[0].plus[0]);
    }

    #[test]
    fn sample_mean_is_zero() {
        let p = unit();
        let vac = ThermalConfig::vacuum();
        let cov = build_covariance(5.0, &small_grid(), &p, &vac).unwrap();
        let count = 2000;
        let n = cov.grid.n;
        let mut mean = vec![0.0; n];
        for t in 0..count {
            let r = sample_one(&cov, 7, t);
            for i in 0..n {
                mean[i] += r.plus[2][i] - r.minus[2][i];
            }
        }
        let sigma = cov.blocks[0][2].sqrt();
        for m in &mean {
            let m = m / count as f64;
            assert!(m.abs() < 4.0 * sigma / (count as f64).sqrt() * 1.5, "mean {m} vs sigma {sigma}");
        }
    }
}

//! Linearized Langevin dynamics of a trapped atom near the mirror: trap
//! renormalization by the CP force gradient, trajectory integration,
//! ensembles over noise realizations, and the mirror-induced dispersion
//! observable.
//!
//! The ensemble pipeline samples the bounce-free image noise kernel through
//! a circulant spectral factorization, restricted by a Gaussian band window
//! centered on the internal frequency Omega. The window excludes the trap
//! resonance, whose pickup is cancelled by the dropped dissipation kernel in
//! the full theory, and suppresses the z-oscillatory ridge content that the
//! far-field limit discards. Each trajectory is integrated from rest with
//! velocity-Verlet; the never-decaying switch-on ring of the undamped trap
//! mode is projected out of the windowed trajectory before moments are
//! accumulated, restoring the stationary response weights.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::cpforce::cp_force_gradient;
use crate::error::{Error, Result};
use crate::noise::standard_normal;
use crate::params::{AtomParams, ThermalConfig, TimeGrid, TrapConfig};
use crate::specfun::aux_fg;

const PI: f64 = std::f64::consts::PI;

/// Per-axis ensemble statistics of the mirror-induced variance change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleStats {
    pub z_bar: f64,
    pub count: usize,
    /// Length of the discarded initial segment, in time units.
    pub burn_in_span: f64,
    /// Signed mirror-induced variance change per axis.
    pub variance: [f64; 3],
    /// Standard errors from independent trajectories.
    pub stderr: [f64; 3],
    /// Split-half drift in units of its standard error (stationarity check).
    pub drift_sigma: [f64; 3],
}

/// Effective trap frequencies: the z frequency is renormalized by the CP
/// force gradient, Omega~_z^2 = Omega_z^2 - F'(z_bar)/M; transverse
/// frequencies are unchanged (the transverse CP gradient vanishes for a
/// plane mirror).
pub fn effective_trap_frequencies(trap: &TrapConfig, p: &AtomParams, thermal: &ThermalConfig) -> Result<[f64; 3]> {
    trap.validate()?;
    p.validate()?;
    if !trap.include_cp_shift {
        return Ok(trap.omega_trap);
    }
    let grad = cp_force_gradient(trap.z_bar, p, thermal)?;
    let wz_sq = trap.omega_trap[2] * trap.omega_trap[2] - grad / p.mass_com;
    if wz_sq <= 0.0 {
        return Err(Error::UnstableTrap { axis: 'z', omega_sq: wz_sq });
    }
    Ok([trap.omega_trap[0], trap.omega_trap[1], wz_sq.sqrt()])
}

/// Velocity-Verlet integration of one driven axis:
/// M x'' = -M w^2 x - M gamma x' + xi(t), with the drive sampled at the grid
/// points (trapezoidal in the velocity update, consistent with linear
/// interpolation of the noise).
pub fn integrate_axis(
    x0: f64,
    v0: f64,
    noise: &[f64],
    omega_eff: f64,
    gamma: f64,
    mass: f64,
    dt: f64,
) -> Vec<f64> {
    let n = noise.len();
    let mut out = Vec::with_capacity(n);
    let mut x = x0;
    let mut v = v0;
    let w2 = omega_eff * omega_eff;
    let mut acc = -w2 * x + noise[0] / mass;
    out.push(x);
    let damp = 1.0 + 0.5 * gamma * dt;
    for item in noise.iter().take(n).skip(1) {
        x += dt * v * (1.0 - 0.5 * gamma * dt) + 0.5 * dt * dt * acc;
        let acc_new = -w2 * x + item / mass;
        v = ((1.0 - 0.5 * gamma * dt) * v + 0.5 * dt * (acc + acc_new)) / damp;
        acc = acc_new;
        out.push(x);
    }
    out
}

/// Integrate the three decoupled deviation axes driven by one noise
/// realization. `ic` holds (position, velocity) per axis.
pub fn integrate_trajectory(
    ic: [[f64; 2]; 3],
    noise: &[Vec<f64>; 3],
    trap: &TrapConfig,
    p: &AtomParams,
    grid: &TimeGrid,
) -> Result<[Vec<f64>; 3]> {
    grid.validate_basic()?;
    let thermal = ThermalConfig::vacuum();
    let w_eff = effective_trap_frequencies(trap, p, &thermal)?;
    let w_max = w_eff.iter().cloned().fold(0.0f64, f64::max);
    if grid.dt * w_max > 0.1 {
        return Err(Error::StepSize(format!(
            "dt * Omega~ = {:.3} exceeds 0.1; refine the grid",
            grid.dt * w_max
        )));
    }
    for axis in 0..3 {
        if noise[axis].len() != grid.n {
            return Err(Error::Domain(format!(
                "noise realization on axis {axis} has {} samples, grid has {}",
                noise[axis].len(),
                grid.n
            )));
        }
    }
    Ok([
        integrate_axis(ic[0][0], ic[0][1], &noise[0], w_eff[0], trap.gamma, p.mass_com, grid.dt),
        integrate_axis(ic[1][0], ic[1][1], &noise[1], w_eff[1], trap.gamma, p.mass_com, grid.dt),
        integrate_axis(ic[2][0], ic[2][1], &noise[2], w_eff[2], trap.gamma, p.mass_com, grid.dt),
    ])
}

/// Spectral-sampler controls for the ensemble pipeline.
#[derive(Debug, Clone, Copy)]
pub struct SamplerSettings {
    /// Gaussian width of the band window around |omega| = Omega; None picks
    /// 0.85 min_k |Omega - Omega~_k| / 2.8.
    pub window_sigma: Option<f64>,
    /// Hard cutoff of the band window; None picks 2.8 sigma.
    pub window_cut: Option<f64>,
    /// Fraction of the grid discarded as burn-in.
    pub burn_frac: f64,
    /// Project the trap-frequency sinusoid out of each windowed trajectory.
    pub project_ring: bool,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self { window_sigma: None, window_cut: None, burn_frac: 0.2, project_ring: true }
    }
}

fn resolve_window(settings: &SamplerSettings, omega: f64, w_eff: &[f64; 3]) -> Result<(f64, f64)> {
    let min_det = w_eff.iter().map(|w| (w - omega).abs()).fold(f64::INFINITY, f64::min);
    let cut = settings.window_cut.unwrap_or(0.85 * min_det);
    let sigma = settings.window_sigma.unwrap_or(cut / 2.8);
    if !(cut > 0.0 && sigma > 0.0) {
        return Err(Error::Domain("band window parameters must be positive".into()));
    }
    if cut > min_det * (1.0 - 1e-9) {
        return Err(Error::Regime(format!(
            "band window cut {cut:.3} reaches the trap resonance (min detuning {min_det:.3})"
        )));
    }
    Ok((sigma, cut))
}

/// Banded circulant spectrum of the bounce-free kernel on the doubled grid.
/// Returns (lambda masked by the window, omega per bin).
fn band_spectrum(
    z: f64,
    axis: usize,
    grid: &TimeGrid,
    p: &AtomParams,
    thermal: &ThermalConfig,
    sigma: f64,
    cut: f64,
    fft: &Arc<dyn Fft<f64>>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.n;
    let big_n = 2 * n;
    let mut buf: Vec<Complex64> = Vec::with_capacity(big_n);
    for j in 0..big_n {
        let lag = j.min(big_n - j) as f64 * grid.dt;
        let c = crate::noise::noise_correlation_smooth(z, lag, p, thermal)?;
        buf.push(Complex64::new(c[axis][axis], 0.0));
    }
    fft.process(&mut buf);
    let mut lam = Vec::with_capacity(big_n);
    let mut om = Vec::with_capacity(big_n);
    for (k, v) in buf.iter().enumerate() {
        let freq_idx = if k <= big_n / 2 { k as f64 } else { k as f64 - big_n as f64 };
        let w = 2.0 * PI * freq_idx / (big_n as f64 * grid.dt);
        let nu = (w.abs() - p.omega).abs();
        let mask = if nu > cut { 0.0 } else { (-0.5 * (nu / sigma) * (nu / sigma)).exp() };
        lam.push(v.re * mask);
        om.push(w);
    }
    Ok((lam, om))
}

/// Least-squares removal of alpha cos(w t) + beta sin(w t) over the window.
fn project_ring_mode(xs: &mut [f64], times: &[f64], w: f64) {
    let mut cc = 0.0;
    let mut cs = 0.0;
    let mut ss = 0.0;
    let mut rc = 0.0;
    let mut rs = 0.0;
    for (x, t) in xs.iter().zip(times) {
        let (s, c) = (w * t).sin_cos();
        cc += c * c;
        cs += c * s;
        ss += s * s;
        rc += x * c;
        rs += x * s;
    }
    let det = cc * ss - cs * cs;
    if det.abs() < 1e-300 {
        return;
    }
    let alpha = (ss * rc - cs * rs) / det;
    let beta = (cc * rs - cs * rc) / det;
    for (x, t) in xs.iter_mut().zip(times) {
        let (s, c) = (w * t).sin_cos();
        *x -= alpha * c + beta * s;
    }
}

struct BandSampler {
    lam_sqrt_plus: [Vec<f64>; 3],
    lam_sqrt_minus: [Vec<f64>; 3],
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    big_n: usize,
}

impl BandSampler {
    /// Draw the trajectory-t signed noise pair for one axis; plus and minus
    /// parts share the Gaussian draw (coupling reduces the variance of the
    /// signed estimator without biasing it).
    fn draw(&self, seed: u64, t: usize, axis: usize, out_plus: &mut Vec<f64>, out_minus: &mut Vec<f64>) {
        let n = self.big_n / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((axis as u64) << 48) | t as u64);
        let mut g: Vec<Complex64> = (0..self.big_n)
            .map(|_| Complex64::new(standard_normal(&mut rng), 0.0))
            .collect();
        self.fft_fwd.process(&mut g);
        let mut bp: Vec<Complex64> = g
            .iter()
            .zip(&self.lam_sqrt_plus[axis])
            .map(|(v, s)| v * *s)
            .collect();
        let mut bm: Vec<Complex64> = g
            .iter()
            .zip(&self.lam_sqrt_minus[axis])
            .map(|(v, s)| v * *s)
            .collect();
        self.fft_inv.process(&mut bp);
        self.fft_inv.process(&mut bm);
        let norm = 1.0 / self.big_n as f64;
        out_plus.clear();
        out_minus.clear();
        out_plus.extend(bp[..n].iter().map(|v| v.re * norm));
        out_minus.extend(bm[..n].iter().map(|v| v.re * norm));
    }
}

fn build_sampler(
    z: f64,
    grid: &TimeGrid,
    p: &AtomParams,
    thermal: &ThermalConfig,
    sigma: f64,
    cut: f64,
) -> Result<(BandSampler, [Vec<f64>; 3], Vec<f64>)> {
    let big_n = 2 * grid.n;
    let mut planner = FftPlanner::new();
    let fft_fwd = planner.plan_fft_forward(big_n);
    let fft_inv = planner.plan_fft_inverse(big_n);
    let (lam_x, om) = band_spectrum(z, 0, grid, p, thermal, sigma, cut, &fft_fwd)?;
    let (lam_z, _) = band_spectrum(z, 2, grid, p, thermal, sigma, cut, &fft_fwd)?;
    let lams = [lam_x.clone(), lam_x.clone(), lam_z.clone()];
    let sq = |l: &Vec<f64>, sign: f64| -> Vec<f64> { l.iter().map(|&v| (sign * v).max(0.0).sqrt()).collect() };
    let sampler = BandSampler {
        lam_sqrt_plus: [sq(&lams[0], 1.0), sq(&lams[1], 1.0), sq(&lams[2], 1.0)],
        lam_sqrt_minus: [sq(&lams[0], -1.0), sq(&lams[1], -1.0), sq(&lams[2], -1.0)],
        fft_fwd,
        fft_inv,
        big_n,
    };
    Ok((sampler, lams, om))
}

fn checked_setup(
    z_bar: f64,
    trap: &TrapConfig,
    p: &AtomParams,
    thermal: &ThermalConfig,
    grid: &TimeGrid,
    settings: &SamplerSettings,
) -> Result<([f64; 3], f64, f64, usize)> {
    p.validate()?;
    thermal.validate()?;
    let mut trap_local = *trap;
    trap_local.z_bar = z_bar;
    trap_local.validate()?;
    trap_local.check_regime(p)?;
    grid.validate_resolution(p.omega, z_bar)?;
    let w_eff = effective_trap_frequencies(&trap_local, p, thermal)?;
    let w_max = w_eff.iter().cloned().fold(0.0f64, f64::max);
    if grid.dt * w_max > 0.1 {
        return Err(Error::StepSize(format!("dt * Omega~ = {:.3} exceeds 0.1", grid.dt * w_max)));
    }
    let (sigma, cut) = resolve_window(settings, p.omega, &w_eff)?;
    let burn = ((settings.burn_frac * grid.n as f64) as usize).max(1);
    if burn + 16 >= grid.n {
        return Err(Error::Domain("grid too short for the burn-in window".into()));
    }
    Ok((w_eff, sigma, cut, burn))
}

/// Run an ensemble with the default sampler settings.
pub fn run_ensemble(
    count: usize,
    seed: u64,
    z_bar: f64,
    trap: &TrapConfig,
    p: &AtomParams,
    thermal: &ThermalConfig,
    grid: &TimeGrid,
) -> Result<EnsembleStats> {
    run_ensemble_with(count, seed, z_bar, trap, p, thermal, grid, &SamplerSettings::default())
}

/// Sample `count` signed noise realizations of the mirror-induced kernel,
/// integrate the linearized trajectories, and estimate the per-axis
/// stationary variance change with standard errors from independent
/// trajectories. Deterministic given (seed, configuration).
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble_with(
    count: usize,
    seed: u64,
    z_bar: f64,
    trap: &TrapConfig,
    p: &AtomParams,
    thermal: &ThermalConfig,
    grid: &TimeGrid,
    settings: &SamplerSettings,
) -> Result<EnsembleStats> {
    if count < 100 {
        return Err(Error::Domain(format!("ensemble needs count >= 100, got {count}")));
    }
    let (w_eff, sigma, cut, burn) = checked_setup(z_bar, trap, p, thermal, grid, settings)?;
    let (sampler, _, _) = build_sampler(z_bar, grid, p, thermal, sigma, cut)?;
    let times: Vec<f64> = (burn..grid.n).map(|i| i as f64 * grid.dt).collect();

    // per-trajectory values and split-half differences, indexed by trajectory
    let results: Vec<([f64; 3], [f64; 3])> = (0..count)
        .into_par_iter()
        .map(|t| {
            let mut value = [0.0; 3];
            let mut half_diff = [0.0; 3];
            let mut plus = Vec::new();
            let mut minus = Vec::new();
            for axis in 0..3 {
                sampler.draw(seed, t, axis, &mut plus, &mut minus);
                let mut d2: Vec<f64> = Vec::with_capacity(grid.n - burn);
                let xa = integrate_axis(0.0, 0.0, &plus, w_eff[axis], trap.gamma, p.mass_com, grid.dt);
                let xb = integrate_axis(0.0, 0.0, &minus, w_eff[axis], trap.gamma, p.mass_com, grid.dt);
                let mut wa: Vec<f64> = xa[burn..].to_vec();
                let mut wb: Vec<f64> = xb[burn..].to_vec();
                if settings.project_ring {
                    project_ring_mode(&mut wa, &times, w_eff[axis]);
                    project_ring_mode(&mut wb, &times, w_eff[axis]);
                }
                for i in 0..wa.len() {
                    d2.push(wa[i] * wa[i] - wb[i] * wb[i]);
                }
                let m = d2.len();
                let half = m / 2;
                let mean: f64 = d2.iter().sum::<f64>() / m as f64;
                let first: f64 = d2[..half].iter().sum::<f64>() / half as f64;
                let second: f64 = d2[half..].iter().sum::<f64>() / (m - half) as f64;
                value[axis] = mean;
                half_diff[axis] = second - first;
            }
            (value, half_diff)
        })
        .collect();

    let mut variance = [0.0; 3];
    let mut stderr = [0.0; 3];
    let mut drift_sigma = [0.0; 3];
    for axis in 0..3 {
        let vals: Vec<f64> = results.iter().map(|r| r.0[axis]).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        variance[axis] = mean;
        stderr[axis] = (var / n).sqrt();
        let drifts: Vec<f64> = results.iter().map(|r| r.1[axis]).collect();
        let dmean = drifts.iter().sum::<f64>() / n;
        let dvar = drifts.iter().map(|v| (v - dmean) * (v - dmean)).sum::<f64>() / (n - 1.0);
        drift_sigma[axis] = dmean / (dvar / n).sqrt().max(1e-300);
    }

    for axis in 0..3 {
        if drift_sigma[axis].abs() > 3.0 {
            return Err(Error::BurnIn { drift_sigma: drift_sigma[axis] });
        }
    }

    Ok(EnsembleStats {
        z_bar,
        count,
        burn_in_span: burn as f64 * grid.dt,
        variance,
        stderr,
        drift_sigma,
    })
}

/// Deterministic expectation of the ensemble estimator: the exact mode-sum
/// of the windowed, ring-projected velocity-Verlet response over the banded
/// spectrum. Validates the Monte Carlo machinery independently of sampling.
pub fn dispersion_discrete_expectation(
    z_bar: f64,
    trap: &TrapConfig,
    p: &AtomParams,
    thermal: &ThermalConfig,
    grid: &TimeGrid,
    settings: &SamplerSettings,
) -> Result<[f64; 3]> {
    let (w_eff, sigma, cut, burn) = checked_setup(z_bar, trap, p, thermal, grid, settings)?;
    let (_, lams, om) = build_sampler(z_bar, grid, p, thermal, sigma, cut)?;
    let times: Vec<f64> = (burn..grid.n).map(|i| i as f64 * grid.dt).collect();
    let big_n = 2 * grid.n;
    let mut out = [0.0; 3];
    for axis in 0..3 {
        let modes: Vec<(usize, f64)> = lams[axis]
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != 0.0)
            .map(|(k, &l)| (k, l))
            .collect();
        let total: f64 = modes
            .par_iter()
            .map(|&(k, lam)| {
                let w = om[k].abs();
                let mut resp = 0.0;
                for phase in [0.0, PI / 2.0] {
                    let drive: Vec<f64> = (0..grid.n).map(|i| (w * i as f64 * grid.dt - phase).cos()).collect();
                    let xs = integrate_axis(0.0, 0.0, &drive, w_eff[axis], trap.gamma, p.mass_com, grid.dt);
                    let mut wxs: Vec<f64> = xs[burn..].to_vec();
                    if settings.project_ring {
                        project_ring_mode(&mut wxs, &times, w_eff[axis]);
                    }
                    resp += wxs.iter().map(|x| x * x).sum::<f64>() / wxs.len() as f64;
                }
                lam * resp
            })
            .sum();
        out[axis] = total / big_n as f64;
    }
    Ok(out)
}

/// Mirror-induced variance change per axis as stated in the source analysis:
/// z axis -(15 q^2 / 16 pi^2 m Omega M^2) / ((Omega~_z^2 - Omega^2)^2 z^6),
/// transverse +1/15 of the magnitude with the respective frequencies.
pub fn dispersion_analytic(z_bar: f64, trap: &TrapConfig, p: &AtomParams) -> Result<[f64; 3]> {
    let thermal = ThermalConfig::vacuum();
    let mut t = *trap;
    t.z_bar = z_bar;
    let w_eff = effective_trap_frequencies(&t, p, &thermal)?;
    let base = p.q * p.q / (16.0 * PI * PI * p.m * p.omega * p.mass_com * p.mass_com * z_bar.powi(6));
    let unit = |w: f64| base / (w * w - p.omega * p.omega).powi(2);
    Ok([unit(w_eff[0]), unit(w_eff[1]), -15.0 * unit(w_eff[2])])
}

/// Smooth-master values S_n (sine) and C_n (cosine) for
/// int_0^inf {sin, cos}(c s) / (s + a)^n ds, n = 1..5.
fn masters(c: f64, a: f64) -> Result<([f64; 6], [f64; 6])> {
    let x = c * a;
    let (f, g) = aux_fg(x)?;
    let s = [
        0.0,
        f,
        g * c,
        c * (1.0 - f * a * c) / (2.0 * a),
        c * (1.0 - g * a * a * c * c) / (6.0 * a * a),
        c * (f * a.powi(3) * c.powi(3) - a * a * c * c + 2.0) / (24.0 * a.powi(3)),
    ];
    let cc = [
        0.0,
        g,
        1.0 / a - f * c,
        (1.0 - g * a * a * c * c) / (2.0 * a * a),
        (f * a.powi(3) * c.powi(3) - a * a * c * c + 2.0) / (6.0 * a.powi(3)),
        (g * a.powi(4) * c.powi(4) - a * a * c * c + 6.0) / (24.0 * a.powi(4)),
    ];
    Ok((s, cc))
}

/// Outside-pole partial-fraction coefficients of the spatial factors:
/// M(s) = sum_n c_n^+ / (s + a)^n + (-1)^n c_n^+ / (s - a)^n with
/// c_n^+ = K_n / (pi^2 a^(6 - n)).
fn pf_coeffs(axis: usize, a: f64) -> Vec<(usize, f64)> {
    let k: &[f64] = if axis == 2 { &[12.0, 12.0, 12.0, 12.0, 12.0] } else { &[6.0, 6.0, 5.0, 3.0] };
    k.iter()
        .enumerate()
        .map(|(i, &kn)| (i + 1, kn / (PI * PI * a.powi(6 - (i as i32 + 1)))))
        .collect()
}

/// Exact smooth (dissipation-free, z-oscillation-free) response of the
/// windowed variance estimator to the image noise kernel; approaches
/// (+5, +5, +15) q^2 / (16 pi^2 m Omega M^2 (Omega~^2 - Omega^2)^2 z^6) in
/// the far field.
pub fn dispersion_response(z_bar: f64, trap: &TrapConfig, p: &AtomParams) -> Result<[f64; 3]> {
    let thermal = ThermalConfig::vacuum();
    let mut t = *trap;
    t.z_bar = z_bar;
    let w_eff = effective_trap_frequencies(&t, p, &thermal)?;
    let a = 2.0 * z_bar;
    let mut out = [0.0; 3];
    for axis in 0..3 {
        let wt = w_eff[axis];
        if (wt - p.omega).abs() < 1e-9 * p.omega {
            return Err(Error::Regime("trap frequency degenerate with the internal frequency".into()));
        }
        let cm = (p.omega - wt).abs();
        let cp = p.omega + wt;
        let sgn_m = (p.omega - wt).signum();
        let coeffs = pf_coeffs(axis, a);
        // Ss(c) = 2 sum c_n^+ S_n; Sc(c) = 2 sum c_n^+ (C_{n-1} - a C_n)
        let assemble = |c: f64| -> Result<(f64, f64)> {
            let (s, cc) = masters(c, a)?;
            let mut ss = 0.0;
            let mut sc = 0.0;
            for &(n, cf) in &coeffs {
                ss += 2.0 * cf * s[n];
                let cprev = if n >= 2 { cc[n - 1] } else { 0.0 };
                sc += 2.0 * cf * (cprev - a * cc[n]);
            }
            Ok((ss, sc))
        };
        let (ss_m, sc_m) = assemble(cm)?;
        let (ss_p, sc_p) = assemble(cp)?;
        let t1 = (sc_m + sc_p) / (8.0 * wt * wt);
        let t2 = (-sgn_m * ss_m + ss_p) / (8.0 * wt.powi(3));
        out[axis] = -(p.q * p.q / (p.m * p.omega * p.mass_com * p.mass_com)) * (t1 - t2);
    }
    Ok(out)
}

/// One row of a dispersion scan.
#[derive(Debug, Clone)]
pub struct DispersionRow {
    pub z_bar: f64,
    pub stats: EnsembleStats,
    pub analytic: [f64; 3],
    pub response: [f64; 3],
    pub regime_flag: Option<String>,
}

/// Dispersion-vs-distance scan result.
#[derive(Debug, Clone)]
pub struct DispersionScan {
    pub rows: Vec<DispersionRow>,
    /// Least-squares slope of log |variance_z| vs log z_bar.
    pub slope_z: f64,
    pub slope_stderr: f64,
}

/// Pick a grid for a given z_bar from a step size: the span covers the
/// burn-in (5x the bounce plus margin) and n is padded for the FFT.
pub fn auto_grid(z_bar: f64, dt: f64) -> Result<TimeGrid> {
    let span = (5.0 * (2.0 * z_bar + 40.0)).max(400.0);
    let n_raw = (span / dt).ceil() as usize;
    let n = n_raw.div_ceil(1024) * 1024;
    TimeGrid::new(0.0, dt, n)
}

/// Monte Carlo mirror-induced variance change and analytic predictions over
/// a list of distances, with the log-log slope of the z-axis magnitude.
#[allow(clippy::too_many_arguments)]
pub fn dispersion_scan(
    z_values: &[f64],
    count: usize,
    seed: u64,
    trap: &TrapConfig,
    p: &AtomParams,
    thermal: &ThermalConfig,
    dt: f64,
    settings: &SamplerSettings,
) -> Result<DispersionScan> {
    if z_values.is_empty() {
        return Err(Error::Domain("dispersion scan needs at least one distance".into()));
    }
    let mut rows = Vec::with_capacity(z_values.len());
    for &z in z_values {
        let grid = auto_grid(z, dt)?;
        let mut t = *trap;
        t.z_bar = z;
        let regime_flag = match t.check_regime(p) {
            Ok(()) => {
                if p.omega * z < 10.0 {
                    Some(format!("Omega z = {:.2} < 10: outside the far-field regime", p.omega * z))
                } else {
                    None
                }
            }
            Err(e) => Some(e.to_string()),
        };
        let stats = run_ensemble_with(count, seed, z, &t, p, thermal, &grid, settings)?;
        rows.push(DispersionRow {
            z_bar: z,
            analytic: dispersion_analytic(z, &t, p)?,
            response: dispersion_response(z, &t, p)?,
            stats,
            regime_flag,
        });
    }
    // least-squares slope of ln |var_z| against ln z_bar
    let pts: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r.stats.variance[2] != 0.0)
        .map(|r| {
            let v = r.stats.variance[2].abs();
            (r.z_bar.ln(), v.ln(), r.stats.stderr[2] / v)
        })
        .collect();
    let (slope_z, slope_stderr) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        // propagate the per-point relative errors
        let var: f64 = pts.iter().map(|p| ((p.0 - mx) / sxx * p.2).powi(2)).sum();
        (slope, var.sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(DispersionScan { rows, slope_z, slope_stderr })
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
    fn effective_frequencies_identity_and_shift() {
        let p = unit();
        let vac = ThermalConfig::vacuum();
        let mut trap = TrapConfig::isotropic(0.2, 50.0);
        trap.include_cp_shift = false;
        assert_eq!(effective_trap_frequencies(&trap, &p, &vac).unwrap(), trap.omega_trap);
        trap.include_cp_shift = true;
        let w = effective_trap_frequencies(&trap, &p, &vac).unwrap();
        assert_eq!(w[0], trap.omega_trap[0]);
        assert_eq!(w[1], trap.omega_trap[1]);
        // far field: relative shift below 1e-6
        assert!((w[2] - trap.omega_trap[2]).abs() / trap.omega_trap[2] < 1e-6);
        assert_ne!(w[2], trap.omega_trap[2]);
    }

    #[test]
    fn unstable_trap_detected() {
        let p = unit();
        // near field with a soft trap: gradient overwhelms the trap
        let trap = TrapConfig { omega_trap: [0.2, 0.2, 1e-4], z_bar: 0.05, include_cp_shift: true, gamma: 0.0 };
        let err = effective_trap_frequencies(&trap, &p, &ThermalConfig::vacuum());
        assert!(matches!(err, Err(Error::UnstableTrap { .. })), "{err:?}");
    }

    #[test]
    fn zero_noise_stays_at_rest() {
        let xs = integrate_axis(0.0, 0.0, &vec![0.0; 500], 0.7, 0.0, 1.0, 0.05);
        assert!(xs.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn energy_conservation_displaced() {
        // undamped, no drive, displaced: relative energy spread < 1e-6 over
        // 1000 periods at dt Omega = 2e-3
        let w = 1.0;
        let dt = 2e-3;
        let steps = (1000.0 * 2.0 * PI / w / dt) as usize;
        let noise = vec![0.0; steps];
        let xs = integrate_axis(1.0, 0.0, &noise, w, 0.0, 1.0, dt);
        // reconstruct velocities by central differences for the energy check
        let mut emin = f64::INFINITY;
        let mut emax = f64::NEG_INFINITY;
        for i in (1..steps - 1).step_by(997) {
            let v = (xs[i + 1] - xs[i - 1]) / (2.0 * dt);
            let e = 0.5 * v * v + 0.5 * w * w * xs[i] * xs[i];
            emin = emin.min(e);
            emax = emax.max(e);
        }
        assert!((emax - emin) / emax < 1e-5, "energy spread {}", (emax - emin) / emax);
        // and the position amplitude itself stays put to 1e-6
        let tail_max = xs[steps - 4000..].iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        assert_relative_eq!(tail_max, 1.0, epsilon = 2e-6);
    }

    #[test]
    fn driven_response_amplitude() {
        let (w, wd) = (1.0, 0.6);
        let dt = 5e-3;
        let n = 400_000;
        let drive: Vec<f64> = (0..n).map(|i| (wd * i as f64 * dt).cos()).collect();
        let xs = integrate_axis(0.0, 0.0, &drive, w, 0.0, 1.0, dt);
        // joint least squares at the drive and ring frequencies avoids
        // spectral leakage between the two components
        let burn = n / 5;
        let times: Vec<f64> = (burn..n).map(|i| i as f64 * dt).collect();
        let win: Vec<f64> = xs[burn..].to_vec();
        let basis: Vec<Box<dyn Fn(f64) -> f64>> = vec![
            Box::new(move |t| (wd * t).cos()),
            Box::new(move |t| (wd * t).sin()),
            Box::new(move |t| (w * t).cos()),
            Box::new(move |t| (w * t).sin()),
        ];
        let mut gram = [[0.0f64; 4]; 4];
        let mut rhs = [0.0f64; 4];
        for (x, t) in win.iter().zip(&times) {
            let b: Vec<f64> = basis.iter().map(|f| f(*t)).collect();
            for i in 0..4 {
                rhs[i] += x * b[i];
                for j in 0..4 {
                    gram[i][j] += b[i] * b[j];
                }
            }
        }
        let gm = nalgebra::Matrix4::from_fn(|i, j| gram[i][j]);
        let rv = nalgebra::Vector4::from_row_slice(&rhs);
        let coef = gm.lu().solve(&rv).unwrap();
        let amp = (coef[0] * coef[0] + coef[1] * coef[1]).sqrt();
        let expect = 1.0 / (w * w - wd * wd);
        assert_relative_eq!(amp, expect, max_relative = 1e-4);
    }

    #[test]
    fn dispersion_analytic_structure() {
        let p = unit();
        let trap = TrapConfig::isotropic(0.2, 30.0);
        let d = dispersion_analytic(30.0, &trap, &p).unwrap();
        assert!(d[2] < 0.0 && d[0] > 0.0 && d[1] > 0.0);
        assert_relative_eq!(d[2] / d[0], -15.0, max_relative = 1e-6);
        let d2 = dispersion_analytic(60.0, &trap, &p).unwrap();
        for axis in 0..3 {
            assert_relative_eq!(d2[axis] / d[axis], 1.0 / 64.0, max_relative = 1e-4);
        }
    }

    #[test]
    fn dispersion_response_far_field_coefficients() {
        let p = unit();
        let trap = TrapConfig::isotropic(0.2, 200.0);
        let r = dispersion_response(200.0, &trap, &p).unwrap();
        let base = |w: f64| {
            p.q * p.q / (16.0 * PI * PI * p.m * p.omega * (w * w - p.omega * p.omega).powi(2) * 200f64.powi(6))
        };
        let w = effective_trap_frequencies(&trap, &p, &ThermalConfig::vacuum()).unwrap();
        assert_relative_eq!(r[0] / base(w[0]), 5.0, max_relative = 2e-3);
        assert_relative_eq!(r[2] / base(w[2]), 15.0, max_relative = 2e-3);
        // both axes broaden; anisotropy ratio 3
        assert_relative_eq!(r[2] / r[0], 3.0, max_relative = 1e-3);
    }

    #[test]
    fn ensemble_matches_discrete_expectation() {
        let p = unit();
        let vac = ThermalConfig::vacuum();
        let trap = TrapConfig::isotropic(0.2, 20.0);
        let grid = auto_grid(20.0, 0.25).unwrap();
        let settings = SamplerSettings::default();
        let stats = run_ensemble_with(400, 11, 20.0, &trap, &p, &vac, &grid, &settings).unwrap();
        let expect = dispersion_discrete_expectation(20.0, &trap, &p, &vac, &grid, &settings).unwrap();
        for axis in 0..3 {
            let dev = (stats.variance[axis] - expect[axis]).abs() / stats.stderr[axis];
            assert!(dev < 4.0, "axis {axis}: dev {dev} sigma");
        }
        // response formula agreement within a capture budget at z = 20
        let resp = dispersion_response(20.0, &trap, &p).unwrap();
        for axis in 0..3 {
            assert_relative_eq!(expect[axis], resp[axis], max_relative = 0.10);
        }
    }

    #[test]
    fn ensemble_determinism_and_symmetry() {
        let p = unit();
        let vac = ThermalConfig::vacuum();
        let trap = TrapConfig::isotropic(0.2, 20.0);
        let grid = auto_grid(20.0, 0.25).unwrap();
        let a = run_ensemble(150, 5, 20.0, &trap, &p, &vac, &grid).unwrap();
        let b = run_ensemble(150, 5, 20.0, &trap, &p, &vac, &grid).unwrap();
        assert_eq!(a.variance, b.variance);
        assert_eq!(a.stderr, b.stderr);
        // x and y agree within mutual errors
        let d = (a.variance[0] - a.variance[1]).abs();
        assert!(d < 3.0 * (a.stderr[0] + a.stderr[1]), "x/y asymmetry {d}");
    }

    #[test]
    fn ensemble_error_scaling_with_count() {
        let p = unit();
        let vac = ThermalConfig::vacuum();
        let trap = TrapConfig::isotropic(0.2, 20.0);
        let grid = auto_grid(20.0, 0.25).unwrap();
        let a = run_ensemble(200, 9, 20.0, &trap, &p, &vac, &grid).unwrap();
        let b = run_ensemble(800, 9, 20.0, &trap, &p, &vac, &grid).unwrap();
        // quadrupling count halves the standard error within ~20%
        let ratio = a.stderr[2] / b.stderr[2];
        assert!((ratio - 2.0).abs() < 0.5, "stderr ratio {ratio}");
    }

    #[test]
    fn smooth_kernel_rejects_field_temperature() {
        let p = unit();
        let th = ThermalConfig::with_temperatures(InverseTemperature(1.0), InverseTemperature::VACUUM);
        let trap = TrapConfig::isotropic(0.2, 20.0);
        let grid = auto_grid(20.0, 0.25).unwrap();
        assert!(run_ensemble(150, 1, 20.0, &trap, &p, &th, &grid).is_err());
    }
}

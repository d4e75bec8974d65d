use thiserror::Error;

/// Errors shared by all physics modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation exactly on the light-bounce pole; callers should use
    /// pole-subtracted quadrature instead.
    #[error("pole at s = {s} (light bounce at 2z = {bounce})")]
    Pole { s: f64, bounce: f64 },

    #[error("image-sum truncation failed: tail estimate {tail:.3e} exceeds tolerance {tol:.3e} at k_max = {k_max}")]
    Truncation { tail: f64, tol: f64, k_max: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("covariance ill-conditioned: clipped mass {clipped:.3e} exceeds {limit:.3e} of total spectral mass")]
    IllConditioned { clipped: f64, limit: f64 },

    #[error("unstable trap: effective frequency squared {omega_sq:.3e} along {axis} is not positive")]
    UnstableTrap { axis: char, omega_sq: f64 },

    #[error("grid step too coarse: {0}")]
    StepSize(String),

    #[error("non-stationary ensemble: variance drift {drift_sigma:.1} standard errors over the second half; use a longer grid")]
    BurnIn { drift_sigma: f64 },

    #[error("regime violation: {0}")]
    Regime(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! The Riesz kernel `ε_{α,d}(r) = c_{α,d} r^{α-d}` and its constant.
//!
//! The constant follows the convention
//! `c_{α,d} = 2^{α-d} π^{-d/2} Γ(α/2) / Γ((d-α)/2)`. Note that the classical
//! fundamental solution of `(-Δ)^{α/2}` carries the reciprocal gamma ratio;
//! [`RieszParams::with_constant`] allows runs with any other normalization
//! (for example `c = 1`) when a convention-free answer is wanted.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RieszError};

pub mod probe;

pub use probe::{convolution_ratio_probe, ProbePoint, ProbeReport};

/// Gamma function, accurate to about 1e-15 relative on `(0, 30)`.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Volume of the unit ball in `R^d`, `π^{d/2} / Γ(d/2 + 1)`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let d = dim as f64;
    PI.powf(d / 2.0) / gamma(d / 2.0 + 1.0)
}

/// Surface area of the unit sphere in `R^d`, `2 π^{d/2} / Γ(d/2)`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    let d = dim as f64;
    2.0 * PI.powf(d / 2.0) / gamma(d / 2.0)
}

fn check_order(alpha: f64, dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(RieszError::Domain("dimension must be at least 1".into()));
    }
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(RieszError::Domain(format!(
            "order alpha = {alpha} violates the lower bound 0 < alpha"
        )));
    }
    if alpha >= dim as f64 {
        return Err(RieszError::Domain(format!(
            "order alpha = {alpha} violates the upper bound alpha < d = {dim}"
        )));
    }
    Ok(())
}

/// `c_{α,d} = 2^{α-d} π^{-d/2} Γ(α/2) / Γ((d-α)/2)` for `0 < α < d`.
pub fn riesz_constant(alpha: f64, dim: usize) -> Result<f64> {
    check_order(alpha, dim)?;
    let d = dim as f64;
    Ok(2f64.powf(alpha - d) * PI.powf(-d / 2.0) * gamma(alpha / 2.0) / gamma((d - alpha) / 2.0))
}

/// Order, dimension and kernel constant of a Riesz potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RieszParams {
    alpha: f64,
    dim: usize,
    constant: f64,
}

impl RieszParams {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        let constant = riesz_constant(alpha, dim)?;
        Ok(Self {
            alpha,
            dim,
            constant,
        })
    }

    /// Replace the kernel constant. All spectral quantities scale linearly
    /// (Schatten norms) or as `c^s` (s-fold traces) with it.
    pub fn with_constant(mut self, constant: f64) -> Result<Self> {
        if !constant.is_finite() || constant <= 0.0 {
            return Err(RieszError::Domain(format!(
                "kernel constant must be positive and finite, got {constant}"
            )));
        }
        self.constant = constant;
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Schatten threshold `p₀ = d/α`; the operator lies in `S^p` exactly for
    /// `p > p₀`.
    pub fn p0(&self) -> f64 {
        self.dim as f64 / self.alpha
    }

    /// Decay exponent `θ = α/d` of the eigenvalue bound `λ_j ≤ C |Ω|^θ j^{-θ}`.
    pub fn theta(&self) -> f64 {
        self.alpha / self.dim as f64
    }

    /// Kernel exponent `α - d` (negative).
    pub fn exponent(&self) -> f64 {
        self.alpha - self.dim as f64
    }

    /// `c r^{α-d}` without the `r > 0` check. Callers guarantee `r > 0`.
    #[inline]
    pub(crate) fn eval_unchecked(&self, r: f64) -> f64 {
        self.constant * r.powf(self.exponent())
    }
}

/// `ε_{α,d}(r) = c_{α,d} r^{α-d}` for `r > 0`.
pub fn kernel_eval(params: &RieszParams, r: f64) -> Result<f64> {
    if r.is_nan() || r <= 0.0 {
        return Err(RieszError::Singularity { r });
    }
    Ok(params.eval_unchecked(r))
}

/// Polyharmonic Newton potential of order `2m`, a Riesz potential with
/// `α = 2m`. Requires `0 < m < d/2`.
pub fn newton_params(m: usize, dim: usize) -> Result<RieszParams> {
    if m == 0 || 2 * m >= dim {
        return Err(RieszError::Domain(format!(
            "Newton potential needs 0 < m < d/2; got m = {m}, d = {dim}"
        )));
    }
    RieszParams::new(2.0 * m as f64, dim)
}

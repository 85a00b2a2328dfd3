//! Closed-form Fisher information and azimuth CRLB quantities.
//!
//! Everything here is a function of the integer moments of a
//! [`SelectionSet`]; floating point only enters through the angle terms and
//! the scalar prefactor `2ρβ²|h|²sin²φ`.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::geometry::{Antenna, ArrayGeometry, Moments, SelectionSet};

/// Relative tolerance used when comparing floating-point CRLB values for ties.
pub const TIE_RTOL: f64 = 1e-12;

/// True if `a` and `b` agree to within [`TIE_RTOL`] relative difference.
pub fn nearly_equal(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= TIE_RTOL * a.abs().max(b.abs())
}

/// Scalar inputs of the CRLB prefactor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Linear SNR `p_r / σ_n²`.
    pub rho: f64,
    /// `|h_d|²`
    pub h_mag2: f64,
    /// Elevation in radians, `(0, π/2]`.
    pub phi: f64,
    pub beta: f64,
}

impl SystemParams {
    pub fn new(geom: &ArrayGeometry, rho: f64, h_mag2: f64, phi: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
        }
        if !(h_mag2.is_finite() && h_mag2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "|h|^2 must be positive, got {h_mag2}"
            )));
        }
        if !(phi > 0.0 && phi <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParameter(format!(
                "elevation must lie in (0, pi/2], got {phi}"
            )));
        }
        Ok(Self {
            rho,
            h_mag2,
            phi,
            beta: geom.beta(),
        })
    }

    /// Defaults used throughout the numerical study: ρ = 0 dB, |h|² = 1,
    /// φ = π/3.
    pub fn defaults(geom: &ArrayGeometry) -> Self {
        Self::new(geom, 1.0, 1.0, std::f64::consts::FRAC_PI_3).expect("valid defaults")
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    /// `2ρβ²|h|²sin²φ`
    pub fn prefactor(&self) -> f64 {
        let s = self.phi.sin();
        2.0 * self.rho * self.beta * self.beta * self.h_mag2 * s * s
    }
}

/// Entries of the 2×2 Fisher information matrix over `(θ, φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimEntries {
    pub j_tt: f64,
    pub j_pp: f64,
    pub j_tp: f64,
}

impl FimEntries {
    /// `j_tt − j_tp²/j_pp`, the information left for θ after φ is estimated
    /// jointly. `None` when `j_pp` vanishes.
    pub fn schur_theta(&self) -> Option<f64> {
        // cos(π/2) is not exactly zero in floating point
        let floor = f64::EPSILON * (self.j_tt.abs() + self.j_pp.abs());
        (self.j_pp > floor).then(|| self.j_tt - self.j_tp * self.j_tp / self.j_pp)
    }
}

pub fn fim_entries(s: &SelectionSet, theta: f64, params: &SystemParams) -> FimEntries {
    let m = s.moments();
    let (sxx, syy, sxy) = (m.sxx as f64, m.syy as f64, m.sxy as f64);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = params.phi.sin_cos();
    let k = params.beta * params.beta * params.h_mag2;
    FimEntries {
        j_tt: k * sp * sp * (sxx * st * st + syy * ct * ct - 2.0 * sxy * ct * st),
        j_pp: k * cp * cp * (sxx * ct * ct + syy * st * st + 2.0 * sxy * ct * st),
        j_tp: k * sp * cp * ((syy - sxx) * st * ct + sxy * (ct * ct - st * st)),
    }
}

/// CRLB for θ obtained by inverting the Fisher information blockwise, with
/// the noise variance folded into ρ. `None` if `j_pp = 0` or the Schur
/// complement is not positive.
pub fn crlb_theta_via_fim(s: &SelectionSet, theta: f64, params: &SystemParams) -> Option<f64> {
    let fim = fim_entries(s, theta, params);
    let schur = fim.schur_theta()?;
    (schur > 0.0).then(|| 1.0 / (2.0 * params.rho * schur))
}

/// `Σ (x cosθ + y sinθ)²` expanded over the moments.
pub fn numerator_score(s: &SelectionSet, theta: f64) -> f64 {
    numerator_from_moments(s.moments(), theta)
}

pub(crate) fn numerator_from_moments(m: Moments, theta: f64) -> f64 {
    let (st, ct) = theta.sin_cos();
    ct * ct * m.sxx as f64 + st * st * m.syy as f64 + 2.0 * st * ct * m.sxy as f64
}

/// Instantaneous azimuth CRLB; `+∞` for collinear sets.
pub fn crlb_theta(s: &SelectionSet, theta: f64, params: &SystemParams) -> f64 {
    crlb_from_moments(s.moments(), theta, params)
}

pub(crate) fn crlb_from_moments(m: Moments, theta: f64, params: &SystemParams) -> f64 {
    let det = m.det();
    if det == 0 {
        return f64::INFINITY;
    }
    numerator_from_moments(m, theta) / (params.prefactor() * det as f64)
}

/// Antenna-dependent factor of the θ-averaged CRLB,
/// `(sxx + syy) / (sxx·syy − sxy²)`; `+∞` when collinear.
pub fn expected_u(s: &SelectionSet) -> f64 {
    let m = s.moments();
    match m.det() {
        0 => f64::INFINITY,
        d => m.trace() as f64 / d as f64,
    }
}

/// Exact rational form of [`expected_u`]; `None` when collinear.
pub fn expected_u_exact(m: Moments) -> Option<Ratio<i64>> {
    match m.det() {
        0 => None,
        d => Some(Ratio::new(m.trace(), d)),
    }
}

/// Total order on optional exact `U` values with `None` (collinear) worst.
pub(crate) fn cmp_exact_u(a: &Option<Ratio<i64>>, b: &Option<Ratio<i64>>) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    match (a, b) {
        (Some(x), Some(y)) => x.cmp(y),
        (Some(_), None) => Less,
        (None, Some(_)) => Greater,
        (None, None) => Equal,
    }
}

/// CRLB averaged over a uniformly distributed azimuth.
///
/// The angular numerator averages to `(sxx + syy)/2`, so this is
/// `U / (2 · prefactor)`.
pub fn expected_crlb(s: &SelectionSet, params: &SystemParams) -> Result<f64> {
    if s.det() == 0 {
        return Err(Error::DegenerateSet);
    }
    Ok(expected_u(s) / (2.0 * params.prefactor()))
}

/// Ranking function for start sets `{(0,0), a1, a2}` with `alpha = tan θ`.
///
/// `crlb_theta = cos²θ / (2ρβ²|h|²sin²φ) · q_theta` whenever `cos θ ≠ 0`.
pub fn q_theta(a1: Antenna, a2: Antenna, alpha: f64) -> f64 {
    let cross = a1.cross(a2);
    if cross == 0 {
        return f64::INFINITY;
    }
    let t1 = a1.x as f64 + alpha * a1.y as f64;
    let t2 = a2.x as f64 + alpha * a2.y as f64;
    (t1 * t1 + t2 * t2) / (cross as f64 * cross as f64)
}

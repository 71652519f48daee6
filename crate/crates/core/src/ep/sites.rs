//! Moment-matching updates for the two non-Gaussian factor types.
//!
//! Both factors have closed-form tilted moments. Writing the cavity as
//! `N(m̄, v̄)`, `r = φ(α)/Φ(α)` and `β = r(r+α)/s`:
//!
//! * `𝕀[z < 0]`: `α = -m̄/√v̄`, `s = v̄`, new site
//!   `ṽ = 1/β - v̄`, `m̃ = m̄ - √v̄/(r+α)`.
//! * `Φ((z - y_max)/σ)`: `α = (m̄ - y_max)/√(v̄+σ²)`, `s = v̄+σ²`, new site
//!   `ṽ = 1/β - v̄`, `m̃ = m̄ + √s/(r+α)`.

use crate::error::{Error, Result};
use crate::normal::truncation_factors;

/// Tilted moments and the Gaussian site that reproduces them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteUpdate {
    pub site_mean: f64,
    /// May be `+∞` when the factor is inactive under the cavity.
    pub site_variance: f64,
    pub tilted_mean: f64,
    pub tilted_variance: f64,
}

fn check_cavity(cav_var: f64, cav_mean: f64) -> Result<()> {
    if !(cav_var > 0.0) || !cav_var.is_finite() || !cav_mean.is_finite() {
        return Err(Error::InvalidArgument(format!("cavity N({cav_mean}, {cav_var}) is not a proper Gaussian")));
    }
    Ok(())
}

/// Site update for the factor `𝕀[z < 0]` (a negative Hessian diagonal).
pub fn ep_site_trunc_negative(cav_mean: f64, cav_var: f64) -> Result<SiteUpdate> {
    check_cavity(cav_var, cav_mean)?;
    let sd = cav_var.sqrt();
    let alpha = -cav_mean / sd;
    let (r, r_plus_a, var_factor) = truncation_factors(alpha);
    let rr = r * r_plus_a;
    Ok(SiteUpdate {
        site_mean: cav_mean - sd / r_plus_a,
        site_variance: cav_var * var_factor / rr,
        tilted_mean: cav_mean - sd * r,
        tilted_variance: cav_var * var_factor,
    })
}

/// Site update for the soft constraint `Φ((z - y_max)/σ)`, i.e.
/// `z > y_max + ε` with `ε ~ N(0, σ²)` integrated out.
pub fn ep_site_softmax(cav_mean: f64, cav_var: f64, y_max: f64, noise_variance: f64) -> Result<SiteUpdate> {
    check_cavity(cav_var, cav_mean)?;
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance must be non-negative, got {noise_variance}")));
    }
    let s = cav_var + noise_variance;
    let sd = s.sqrt();
    let alpha = (cav_mean - y_max) / sd;
    let (r, r_plus_a, var_factor) = truncation_factors(alpha);
    let rr = r * r_plus_a;
    // tilted variance v̄ - v̄² rr / s, written so it stays positive as rr → 1
    let tilted_variance = cav_var * (noise_variance + cav_var * var_factor) / s;
    // ṽ = s/rr - v̄ = (s - v̄ rr)/rr
    let site_variance = (noise_variance + cav_var * var_factor) / rr;
    Ok(SiteUpdate {
        site_mean: cav_mean + sd / r_plus_a,
        site_variance,
        tilted_mean: cav_mean + cav_var * r / sd,
        tilted_variance,
    })
}

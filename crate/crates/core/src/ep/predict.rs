//! Predictive distribution of `[f(x); f(x⋆)]` under the EP approximation and
//! its truncation to `f(x) < f(x⋆)`.

use nalgebra::DVector;
use serde::Serialize;

use super::{conditioning_values, max_diagonal, EpCache};
use crate::derivatives::{cov_with_derivatives, covariance_with_value, DerivativeBlockSpec, Observable};
use crate::error::{check_dim, Error, Result};
use crate::gp::{se, Dataset, Hyperparams};
use crate::linalg::Factor;
use crate::normal::inv_mills_pair;
use crate::spectral::MaximizerSample;

/// Smallest admissible `s = Var[f(x⋆) - f(x)]`.
pub const S_FLOOR: f64 = 1e-10;

/// Output of [`truncated_variance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedVariance {
    /// `Var[f(x) | f(x) < f(x⋆)]` under the Gaussian approximation.
    pub variance: f64,
    /// `E[f(x) | f(x) < f(x⋆)]`; not used by the acquisition.
    pub mean: f64,
    /// Scaling applied to the cross-covariance; 1 unless `s` was too small.
    pub kappa: f64,
    pub s: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Variance of `f(x)` after truncating the bivariate Gaussian
/// `N(m_f, V_f)` over `[f(x); f(x⋆)]` to `f(x) < f(x⋆)`:
///
/// ```text
/// s = V₁₁ + V₂₂ - 2V₁₂,  μ = m₂ - m₁,  α = μ/√s,  β = φ(α)/Φ(α)
/// v = V₁₁ - β(β + α)(V₁₁ - V₁₂)² / s
/// ```
///
/// When `s ≤ 1e-10` the cross-covariance is scaled by the largest
/// `κ ∈ [0, 1]` that brings `s` above the floor. The result is clamped to
/// `[0, V₁₁]`.
pub fn truncated_variance(mean: [f64; 2], cov: [[f64; 2]; 2]) -> TruncatedVariance {
    let (v11, v22) = (cov[0][0], cov[1][1]);
    let v12 = 0.5 * (cov[0][1] + cov[1][0]);
    let mu = mean[1] - mean[0];
    let mut kappa = 1.0;
    let mut s = v11 + v22 - 2.0 * v12;
    if !(s > S_FLOOR) {
        // s(κ) = V₁₁ + V₂₂ - 2κV₁₂ is linear in κ
        let target = S_FLOOR * (1.0 + 1e-6);
        kappa = if v12 > 0.0 { ((v11 + v22 - target) / (2.0 * v12)).clamp(0.0, 1.0) } else { 0.0 };
        s = v11 + v22 - 2.0 * kappa * v12;
        if !(s > S_FLOOR) {
            let variance = v11.max(0.0);
            return TruncatedVariance { variance, mean: mean[0], kappa: 0.0, s, mu, alpha: f64::NAN, beta: f64::NAN };
        }
    }
    let alpha = mu / s.sqrt();
    let (beta, beta_plus_alpha) = inv_mills_pair(alpha);
    let gap = v11 - kappa * v12;
    let raw = v11 - beta * beta_plus_alpha * gap * gap / s;
    let variance = if raw.is_finite() { raw.clamp(0.0, v11.max(0.0)) } else { v11.max(0.0) };
    let mean = mean[0] - beta * gap / s.sqrt();
    TruncatedVariance { variance, mean, kappa, s, mu, alpha, beta }
}

/// Bivariate predictive over `[f(x); f(x⋆)]` and its truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionedPrediction {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub truncation: TruncatedVariance,
}

impl ConditionedPrediction {
    /// `v_n(x | x⋆)`
    pub fn variance(&self) -> f64 {
        self.truncation.variance
    }
}

/// Precomputed solves for predicting at many `x` with one EP cache.
///
/// The EP sites act as Gaussian pseudo-observations `m̃ᵢ` of `zᵢ` with noise
/// `ṽᵢ`, so the predictive comes from one joint solve over
/// `u = [z; c]` with covariance `K_u + W̃`, `W̃ = diag(ṽ, 0)`.
#[derive(Debug, Clone)]
pub struct ConditionedPredictor {
    hp: Hyperparams,
    observables: Vec<Observable>,
    xstar: Vec<f64>,
    factor: Factor,
    /// `(K_u + W̃)⁻¹ [m̃; c]`
    weights: DVector<f64>,
    /// `L⁻¹ k(u, x⋆)`
    star_solved: Vec<f64>,
    star_mean: f64,
    star_var: f64,
}

impl ConditionedPredictor {
    pub fn new(cache: &EpCache, data: &Dataset, xstar: &MaximizerSample, hp: &Hyperparams) -> Result<Self> {
        let d = hp.dim();
        check_dim(d, xstar.location.len())?;
        check_dim(d + 1, cache.prior().dim())?;
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let spec = DerivativeBlockSpec::full(&xstar.location);
        let observables = spec.observables(data.inputs());
        let mut k = cov_with_derivatives(&spec, data.inputs(), hp)?;
        let scale = max_diagonal(&k);
        for (i, v) in cache.site_variances().iter().enumerate() {
            k[(i, i)] += v;
        }
        let factor = Factor::new(&k, scale, "K_u + W")?;
        let mut targets = cache.site_means().to_vec();
        targets.extend(conditioning_values(data, xstar).iter());
        let weights = factor.solve(&DVector::from_vec(targets));

        let mut star: Vec<f64> = observables.iter().map(|o| covariance_with_value(&xstar.location, o, hp)).collect();
        let star_mean = dot(&star, weights.as_slice());
        factor.forward_solve_in_place(&mut star);
        let star_var = (hp.amplitude() - dot(&star, &star)).clamp(0.0, hp.amplitude());
        Ok(Self {
            hp: hp.clone(),
            observables,
            xstar: xstar.location.clone(),
            factor,
            weights,
            star_solved: star,
            star_mean,
            star_var,
        })
    }

    /// Size of the joint system `n + (d + 1) + d + d(d-1)/2`.
    pub fn system_size(&self) -> usize {
        self.observables.len()
    }

    /// Mean and covariance of `[f(x); f(x⋆)]`.
    pub fn joint(&self, x: &[f64]) -> Result<([f64; 2], [[f64; 2]; 2])> {
        check_dim(self.hp.dim(), x.len())?;
        let mut kx: Vec<f64> = self.observables.iter().map(|o| covariance_with_value(x, o, &self.hp)).collect();
        let m1 = dot(&kx, self.weights.as_slice());
        self.factor.forward_solve_in_place(&mut kx);
        let gamma2 = self.hp.amplitude();
        let v11 = (gamma2 - dot(&kx, &kx)).clamp(0.0, gamma2);
        let v12 = se(x, &self.xstar, &self.hp) - dot(&kx, &self.star_solved);
        Ok(([m1, self.star_mean], [[v11, v12], [v12, self.star_var]]))
    }

    pub fn predict(&self, x: &[f64]) -> Result<ConditionedPrediction> {
        let (mean, cov) = self.joint(x)?;
        Ok(ConditionedPrediction { mean, cov, truncation: truncated_variance(mean, cov) })
    }
}

/// One-shot [`ConditionedPredictor::predict`].
pub fn conditioned_predict(
    cache: &EpCache,
    x: &[f64],
    xstar: &MaximizerSample,
    data: &Dataset,
    hp: &Hyperparams,
) -> Result<ConditionedPrediction> {
    ConditionedPredictor::new(cache, data, xstar, hp)?.predict(x)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

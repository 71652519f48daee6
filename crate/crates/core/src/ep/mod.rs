//! Conditioning the GP on a sampled maximizer `x⋆`.
//!
//! The constraints are imposed in two stages. Equality constraints (the
//! data, a zero gradient at `x⋆` and the off-diagonal Hessian) are Gaussian
//! and handled by conditioning the latent vector
//! `z = [f(x⋆); diag ∇²f(x⋆)]`. The two inequality constraints,
//! `f(x⋆) > y_max + ε` and a negative Hessian diagonal, are approximated by
//! expectation propagation with one Gaussian site per coordinate of `z`.

mod predict;
mod sites;

pub use predict::{conditioned_predict, truncated_variance, ConditionedPrediction, ConditionedPredictor, TruncatedVariance};
pub use sites::{ep_site_softmax, ep_site_trunc_negative, SiteUpdate};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::derivatives::{cov_with_derivatives, DerivativeBlockSpec};
use crate::error::{check_dim, Error, Result};
use crate::gp::{Dataset, Hyperparams};
use crate::linalg::Factor;
use crate::spectral::MaximizerSample;

/// Bounds applied to every site variance.
pub const SITE_VARIANCE_MIN: f64 = 1e-10;
pub const SITE_VARIANCE_MAX: f64 = 1e10;
/// Damping applied to a site after it misbehaved.
pub const DAMPING: f64 = 0.5;

/// Gaussian prior `N(m₀, V₀)` over `z` after the equality constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ZPrior {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    jitter: f64,
}

impl ZPrior {
    /// Wraps a mean and covariance, symmetrizing and jittering the latter
    /// until it factorizes. Jitter is relative to the largest variance.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let scale = cov.diagonal().iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        Self::with_jitter_scale(mean, cov, scale)
    }

    /// As [`ZPrior::new`] with jitter relative to `scale`, typically the
    /// largest prior variance before conditioning.
    pub fn with_jitter_scale(mean: DVector<f64>, cov: DMatrix<f64>, scale: f64) -> Result<Self> {
        check_dim(mean.len(), cov.nrows())?;
        check_dim(mean.len(), cov.ncols())?;
        if mean.is_empty() {
            return Err(Error::InvalidArgument("z prior must have at least one coordinate".into()));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("z prior mean"));
        }
        let mut cov = (&cov + cov.transpose()) * 0.5;
        let scale = scale.max(1e-300);
        let factor = Factor::new(&cov, scale, "z prior covariance")?;
        for i in 0..cov.nrows() {
            cov[(i, i)] += factor.jitter();
        }
        Ok(Self { mean, cov, jitter: factor.jitter() })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Diagonal jitter that was added to `V₀`.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }
}

pub(crate) fn max_diagonal(m: &DMatrix<f64>) -> f64 {
    m.diagonal().iter().fold(0.0_f64, |a, b| a.max(b.abs()))
}

/// Values of the conditioning block `c = [y; ∇f(x⋆) = 0; upper ∇²f(x⋆)]`.
pub(crate) fn conditioning_values(data: &Dataset, xstar: &MaximizerSample) -> DVector<f64> {
    let d = xstar.location.len();
    let mut c = Vec::with_capacity(data.len() + d + xstar.hessian_upper.len());
    c.extend_from_slice(data.outputs());
    c.extend(std::iter::repeat_n(0.0, d));
    c.extend_from_slice(&xstar.hessian_upper);
    DVector::from_vec(c)
}

/// `p(z | c) = N(m₀, V₀)` with `m₀ = K_zc K_c⁻¹ c` and
/// `V₀ = K_z - K_zc K_c⁻¹ K_cz`.
pub fn build_z_prior(data: &Dataset, xstar: &MaximizerSample, hp: &Hyperparams) -> Result<ZPrior> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = hp.dim();
    check_dim(d, data.dim())?;
    check_dim(d, xstar.location.len())?;
    check_dim(d * (d - 1) / 2, xstar.hessian_upper.len())?;
    let spec = DerivativeBlockSpec::full(&xstar.location);
    let k = cov_with_derivatives(&spec, data.inputs(), hp)?;
    let nz = d + 1;
    let nc = k.nrows() - nz;
    let k_z = k.view((0, 0), (nz, nz));
    let k_zc = k.view((0, nz), (nz, nc));
    let k_c = k.view((nz, nz), (nc, nc)).into_owned();
    let factor = Factor::new(&k_c, max_diagonal(&k_c), "K_c")?;
    let c = conditioning_values(data, xstar);
    let mean = k_zc * factor.solve(&c);
    let scale = max_diagonal(&k_z.into_owned());
    let cov = k_z - k_zc * factor.solve_matrix(&k_zc.transpose());
    ZPrior::with_jitter_scale(mean, cov, scale)
}

/// Which factor a site approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SiteKind {
    /// `Φ((z - y_max)/σ)`
    SoftMax,
    /// `𝕀[z < 0]`
    Negative,
}

/// EP state: prior, sites, and the fused Gaussian `q(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpCache {
    prior: ZPrior,
    site_means: Vec<f64>,
    site_variances: Vec<f64>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    y_max: f64,
    noise_variance: f64,
    converged: bool,
    sweeps: usize,
}

impl EpCache {
    pub fn prior(&self) -> &ZPrior {
        &self.prior
    }

    pub fn site_means(&self) -> &[f64] {
        &self.site_means
    }

    /// Site variances, each within `[SITE_VARIANCE_MIN, SITE_VARIANCE_MAX]`.
    pub fn site_variances(&self) -> &[f64] {
        &self.site_variances
    }

    /// Mean of `q(z)`.
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Covariance of `q(z)`.
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn site_kind(i: usize) -> SiteKind {
        if i == 0 {
            SiteKind::SoftMax
        } else {
            SiteKind::Negative
        }
    }
}

/// Iteration controls for [`ep_refine_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpOptions {
    pub max_sweeps: usize,
    /// Largest per-site change (relative, see [`site_change`]) accepted as
    /// converged.
    pub tolerance: f64,
}

impl Default for EpOptions {
    fn default() -> Self {
        Self { max_sweeps: 200, tolerance: 1e-6 }
    }
}

/// Change between two site states: `|Δm̃|/(1 + |m̃|)` and `|Δṽ|/ṽ`.
fn site_change(old_mean: f64, old_var: f64, new_mean: f64, new_var: f64) -> f64 {
    let dm = (new_mean - old_mean).abs() / (1.0 + new_mean.abs());
    let dv = (new_var - old_var).abs() / new_var;
    dm.max(dv)
}

/// Fused Gaussian from prior and sites, written without `V₀⁻¹`:
/// with `S = diag(1/ṽ)` and `B = I + S½ V₀ S½`,
/// `V = V₀ - V₀ S½ B⁻¹ S½ V₀` and `m = m₀ - V₀ S½ B⁻¹ S½ m₀ + V S m̃`.
pub fn fuse(prior: &ZPrior, site_means: &[f64], site_variances: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let k = prior.dim();
    check_dim(k, site_means.len())?;
    check_dim(k, site_variances.len())?;
    let v0 = &prior.cov;
    let sqrt_prec = DVector::from_iterator(k, site_variances.iter().map(|v| (1.0 / v).sqrt()));
    let mut b = DMatrix::identity(k, k);
    for j in 0..k {
        for i in 0..k {
            b[(i, j)] += sqrt_prec[i] * v0[(i, j)] * sqrt_prec[j];
        }
    }
    let b_factor = Factor::new(&b, 1.0, "EP fusion matrix")?;
    // C = S½ V₀, so V = V₀ - Cᵀ B⁻¹ C
    let c = DMatrix::from_fn(k, k, |i, j| sqrt_prec[i] * v0[(i, j)]);
    let mut cov = v0 - c.transpose() * b_factor.solve_matrix(&c);
    cov = (&cov + cov.transpose()) * 0.5;
    let s_m0 = prior.mean.component_mul(&sqrt_prec);
    let nu = DVector::from_iterator(k, site_means.iter().zip(site_variances).map(|(m, v)| m / v));
    let mean = &prior.mean - c.transpose() * b_factor.solve(&s_m0) + &cov * nu;
    Ok((mean, cov))
}

/// [`ep_refine_with`] under the default options.
pub fn ep_refine(prior: &ZPrior, y_max: f64, noise_variance: f64) -> Result<EpCache> {
    ep_refine_with(prior, y_max, noise_variance, EpOptions::default())
}

/// Runs EP sweeps, soft-max site first then the Hessian sites in coordinate
/// order, starting from flat sites.
///
/// A site whose cavity is not a proper Gaussian is skipped for that sweep,
/// and a candidate site variance that is not positive is replaced by
/// [`SITE_VARIANCE_MAX`]; either event turns on damping for that site. When
/// the sweep budget runs out the last iterate is returned with
/// `converged() == false`.
pub fn ep_refine_with(prior: &ZPrior, y_max: f64, noise_variance: f64, options: EpOptions) -> Result<EpCache> {
    if !y_max.is_finite() {
        return Err(Error::NonFinite("y_max"));
    }
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance must be non-negative, got {noise_variance}")));
    }
    let k = prior.dim();
    let mut site_means = vec![0.0; k];
    let mut site_variances = vec![f64::INFINITY; k];
    let mut damped = vec![false; k];
    let mut mean = prior.mean.clone();
    let mut cov = prior.cov.clone();
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < options.max_sweeps && !converged {
        sweeps += 1;
        let mut worst: f64 = 0.0;
        for i in 0..k {
            let (qm, qv) = (mean[i], cov[(i, i)]);
            let (old_m, old_v) = (site_means[i], site_variances[i]);
            let cav_prec = 1.0 / qv - 1.0 / old_v;
            if !(cav_prec > 0.0) || !qv.is_finite() {
                damped[i] = true;
                worst = f64::INFINITY;
                continue;
            }
            let cav_var = 1.0 / cav_prec;
            let cav_mean = cav_var * (qm / qv - old_m / old_v);
            let update = match EpCache::site_kind(i) {
                SiteKind::SoftMax => ep_site_softmax(cav_mean, cav_var, y_max, noise_variance),
                SiteKind::Negative => ep_site_trunc_negative(cav_mean, cav_var),
            };
            let (mut new_m, mut new_v) = match update {
                Ok(u) if u.site_variance > 0.0 && u.site_mean.is_finite() => {
                    (u.site_mean, u.site_variance.clamp(SITE_VARIANCE_MIN, SITE_VARIANCE_MAX))
                }
                Ok(u) if u.site_variance > 0.0 => (0.0, SITE_VARIANCE_MAX),
                _ => {
                    damped[i] = true;
                    worst = f64::INFINITY;
                    (cav_mean, SITE_VARIANCE_MAX)
                }
            };
            if damped[i] && old_v.is_finite() {
                let prec = (1.0 - DAMPING) / old_v + DAMPING / new_v;
                let nu = (1.0 - DAMPING) * old_m / old_v + DAMPING * new_m / new_v;
                new_v = (1.0 / prec).clamp(SITE_VARIANCE_MIN, SITE_VARIANCE_MAX);
                new_m = nu * new_v;
            }
            worst = worst.max(site_change(old_m, old_v, new_m, new_v));

            // rank-one update of q(z) in natural parameters
            let old_prec = if old_v.is_finite() { 1.0 / old_v } else { 0.0 };
            let old_nu = if old_v.is_finite() { old_m / old_v } else { 0.0 };
            let d_prec = 1.0 / new_v - old_prec;
            let d_nu = new_m / new_v - old_nu;
            let denom = 1.0 + d_prec * qv;
            let col = cov.column(i).into_owned();
            let c = d_prec / denom;
            cov -= &col * col.transpose() * c;
            mean += &col * ((d_nu - d_prec * qm) / denom);
            site_means[i] = new_m;
            site_variances[i] = new_v;
        }
        let (m, v) = fuse(prior, &site_means, &site_variances)?;
        mean = m;
        cov = v;
        converged = worst < options.tolerance;
    }

    Ok(EpCache {
        prior: prior.clone(),
        site_means,
        site_variances,
        mean,
        cov,
        y_max,
        noise_variance,
        converged,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Domain;

    fn xstar_1d(x: f64) -> MaximizerSample {
        MaximizerSample { location: vec![x], value: 0.0, hessian_upper: vec![], on_boundary: false }
    }

    #[test]
    fn zero_targets_give_zero_mean() {
        let hp = Hyperparams::new(1.0, vec![0.3, 0.5], 1e-3).unwrap();
        let data = Dataset::from_pairs(Domain::unit(2), vec![vec![0.1, 0.2], vec![0.7, 0.4]], vec![0.0, 0.0]).unwrap();
        let xs = MaximizerSample { location: vec![0.5, 0.5], value: 0.0, hessian_upper: vec![0.0], on_boundary: false };
        let prior = build_z_prior(&data, &xs, &hp).unwrap();
        assert!(prior.mean().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn conditioning_shrinks_variance() {
        let hp = Hyperparams::new(1.3, vec![0.3, 0.5], 1e-3).unwrap();
        let data = Dataset::from_pairs(Domain::unit(2), vec![vec![0.1, 0.2], vec![0.45, 0.5]], vec![0.3, 1.0]).unwrap();
        let xs = MaximizerSample { location: vec![0.5, 0.5], value: 1.0, hessian_upper: vec![0.4], on_boundary: false };
        let prior = build_z_prior(&data, &xs, &hp).unwrap();
        let spec = DerivativeBlockSpec::full(&xs.location);
        let kz = crate::derivatives::covariance_matrix(&spec.latent_block(), &hp).unwrap();
        for i in 0..3 {
            assert!(prior.cov()[(i, i)] <= kz[(i, i)] + prior.jitter());
        }
    }

    #[test]
    fn empty_data_rejected() {
        let hp = Hyperparams::new(1.0, vec![0.3], 1e-3).unwrap();
        let data = Dataset::new(Domain::unit(1));
        assert_eq!(build_z_prior(&data, &xstar_1d(0.5), &hp), Err(Error::EmptyDataset));
    }

    #[test]
    fn fused_state_matches_recomputation() {
        let hp = Hyperparams::new(1.0, vec![0.2], 1e-4).unwrap();
        let data = Dataset::from_pairs(Domain::unit(1), vec![vec![0.2], vec![0.8]], vec![0.5, -0.3]).unwrap();
        let prior = build_z_prior(&data, &xstar_1d(0.45), &hp).unwrap();
        let cache = ep_refine(&prior, 0.5, 1e-4).unwrap();
        assert!(cache.converged());
        let (m, v) = fuse(cache.prior(), cache.site_means(), cache.site_variances()).unwrap();
        assert!((m - cache.mean()).amax() < 1e-10);
        assert!((v - cache.cov()).amax() < 1e-10);
        assert!(cache.site_variances().iter().all(|v| (SITE_VARIANCE_MIN..=SITE_VARIANCE_MAX).contains(v)));
    }

    #[test]
    fn refine_is_deterministic() {
        let prior = ZPrior::new(DVector::from_vec(vec![0.2, -0.5]), DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0])).unwrap();
        let a = ep_refine(&prior, 0.4, 0.01).unwrap();
        let b = ep_refine(&prior, 0.4, 0.01).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_budget_exhaustion_is_flagged() {
        let prior = ZPrior::new(DVector::from_vec(vec![0.2, 0.5]), DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0])).unwrap();
        let cache = ep_refine_with(&prior, 1.0, 0.01, EpOptions { max_sweeps: 1, tolerance: 1e-6 }).unwrap();
        assert!(!cache.converged());
        assert_eq!(cache.sweeps(), 1);
    }
}

//! Hyperparameter posterior under independent Gamma priors, sampled by
//! coordinate-wise slice sampling in log space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gp::{log_marginal_likelihood, Dataset, Hyperparams};

/// `Gamma(shape, rate)` density on a positive scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub shape: f64,
    pub rate: f64,
}

impl Gamma {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("Gamma({shape}, {rate}) needs positive parameters")));
        }
        Ok(Self { shape, rate })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        (self.shape - 1.0) * x.ln() - self.rate * x + self.shape * self.rate.ln() - libm::lgamma(self.shape)
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }
}

/// Independent Gamma priors on `[γ², ℓ₁..ℓ_d, σ²]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPrior {
    pub amplitude: Gamma,
    pub lengthscales: Vec<Gamma>,
    pub noise_variance: Gamma,
}

impl HyperPrior {
    /// The broad default: `Gamma(1, 0.1)` on every coordinate.
    pub fn broad(dim: usize) -> Self {
        let g = Gamma { shape: 1.0, rate: 0.1 };
        Self { amplitude: g, lengthscales: vec![g; dim], noise_variance: g }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Priors in `Hyperparams::to_vec` order.
    pub fn coordinates(&self) -> Vec<Gamma> {
        let mut v = vec![self.amplitude];
        v.extend_from_slice(&self.lengthscales);
        v.push(self.noise_variance);
        v
    }

    pub fn ln_density(&self, hp: &Hyperparams) -> Result<f64> {
        check_dim(self.dim(), hp.dim())?;
        Ok(self.coordinates().iter().zip(hp.to_vec()).map(|(g, x)| g.ln_pdf(x)).sum())
    }

    /// Prior means as hyperparameters.
    pub fn mean(&self) -> Result<Hyperparams> {
        Hyperparams::from_slice(&self.coordinates().iter().map(Gamma::mean).collect::<Vec<_>>())
    }
}

/// `log p(ψ) + log p(D | ψ)` up to a constant; `-∞` if the kernel matrix
/// cannot be factorized.
pub fn log_hyper_posterior(hp: &Hyperparams, data: &Dataset, prior: &HyperPrior) -> Result<f64> {
    let lp = prior.ln_density(hp)?;
    check_dim(hp.dim(), data.dim())?;
    if data.is_empty() {
        return Ok(lp);
    }
    match log_marginal_likelihood(data, hp) {
        Ok(ll) => Ok(lp + ll),
        Err(Error::NotPositiveDefinite { .. }) | Err(Error::NonFinite(_)) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Stepping-out controls for one univariate slice move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceStep {
    pub width: f64,
    pub max_step_out: usize,
}

impl Default for SliceStep {
    fn default() -> Self {
        Self { width: 1.0, max_step_out: 20 }
    }
}

/// One slice-sampling update of a scalar with stepping-out and shrinkage.
///
/// Returns the new point, its log density and the number of density
/// evaluations spent. `ln_f(x0)` must be finite.
pub fn slice_step<F, R>(mut ln_f: F, x0: f64, ln_f0: f64, step: SliceStep, rng: &mut R) -> (f64, f64, usize)
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    let level = ln_f0 + rng.random::<f64>().ln();
    let mut left = x0 - step.width * rng.random::<f64>();
    let mut right = left + step.width;
    let mut evals = 0;
    let budget = step.max_step_out;
    let mut j = (budget as f64 * rng.random::<f64>()).floor() as usize;
    let mut k = budget.saturating_sub(1).saturating_sub(j);
    while j > 0 && {
        evals += 1;
        ln_f(left) > level
    } {
        left -= step.width;
        j -= 1;
    }
    while k > 0 && {
        evals += 1;
        ln_f(right) > level
    } {
        right += step.width;
        k -= 1;
    }
    loop {
        let x = left + (right - left) * rng.random::<f64>();
        let lx = ln_f(x);
        evals += 1;
        if lx > level {
            return (x, lx, evals);
        }
        if x < x0 {
            left = x;
        } else {
            right = x;
        }
        if right - left < 1e-300_f64.max(1e-14 * x0.abs()) {
            return (x0, ln_f0, evals);
        }
    }
}

/// Chain schedule for [`slice_sample_hypers_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSchedule {
    pub burn_in: usize,
    pub thin: usize,
    pub step: SliceStep,
    /// Starting point; defaults to [`default_start`].
    pub start: Option<Hyperparams>,
}

impl Default for SliceSchedule {
    fn default() -> Self {
        Self { burn_in: 50, thin: 5, step: SliceStep::default(), start: None }
    }
}

/// Retained hyperparameter draws and chain diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPosteriorSamples {
    pub samples: Vec<Hyperparams>,
    pub log_posterior: Vec<f64>,
    /// Density evaluations per sweep, averaged over the chain.
    pub mean_evaluations_per_sweep: f64,
}

impl HyperPosteriorSamples {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Data-scaled starting point: `γ²` from the output variance, lengthscales a
/// quarter of the domain width, `σ² = 0.01 γ²`.
pub fn default_start(data: &Dataset) -> Result<Hyperparams> {
    let y = data.outputs();
    let amp = if y.len() >= 2 {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (y.len() - 1) as f64).max(1e-2)
    } else {
        1.0
    };
    let dom = data.domain();
    let ls = (0..dom.dim()).map(|i| 0.25 * dom.width(i)).collect();
    Hyperparams::new(amp, ls, 1e-2 * amp)
}

/// [`slice_sample_hypers_with`] under the default schedule.
pub fn slice_sample_hypers<R: Rng + ?Sized>(data: &Dataset, prior: &HyperPrior, count: usize, rng: &mut R) -> Result<HyperPosteriorSamples> {
    slice_sample_hypers_with(data, prior, count, &SliceSchedule::default(), rng)
}

/// Coordinate-wise slice sampling of `log ψ` targeting
/// `p(ψ | D) · Πψₖ` (the Jacobian of the log transform).
pub fn slice_sample_hypers_with<R: Rng + ?Sized>(
    data: &Dataset,
    prior: &HyperPrior,
    count: usize,
    schedule: &SliceSchedule,
    rng: &mut R,
) -> Result<HyperPosteriorSamples> {
    if count == 0 {
        return Err(Error::InvalidArgument("at least one hyperparameter sample is required".into()));
    }
    if schedule.thin == 0 {
        return Err(Error::InvalidArgument("thinning interval must be at least 1".into()));
    }
    check_dim(prior.dim(), data.dim())?;
    let start = match &schedule.start {
        Some(s) => s.clone(),
        None => default_start(data)?,
    };
    check_dim(prior.dim(), start.dim())?;

    let target = |u: &[f64]| -> f64 {
        let Ok(hp) = Hyperparams::from_slice(&u.iter().map(|v| v.exp()).collect::<Vec<_>>()) else {
            return f64::NEG_INFINITY;
        };
        match log_hyper_posterior(&hp, data, prior) {
            Ok(lp) => lp + u.iter().sum::<f64>(),
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let mut u: Vec<f64> = start.to_vec().iter().map(|v| v.ln()).collect();
    let mut lu = target(&u);
    if !lu.is_finite() {
        return Err(Error::InvalidArgument("hyperparameter chain start has zero posterior density".into()));
    }
    let sweeps = schedule.burn_in + count * schedule.thin;
    let mut samples = Vec::with_capacity(count);
    let mut log_posterior = Vec::with_capacity(count);
    let mut evaluations = 0usize;
    for sweep in 1..=sweeps {
        for k in 0..u.len() {
            let mut probe = u.clone();
            let ln_f = |x: f64| {
                probe[k] = x;
                target(&probe)
            };
            let (x, lx, e) = slice_step(ln_f, u[k], lu, schedule.step, rng);
            u[k] = x;
            lu = lx;
            evaluations += e;
        }
        if sweep > schedule.burn_in && (sweep - schedule.burn_in).is_multiple_of(schedule.thin) {
            let v: Vec<f64> = u.iter().map(|x| x.exp()).collect();
            samples.push(Hyperparams::from_slice(&v)?);
            log_posterior.push(lu - u.iter().sum::<f64>());
        }
    }
    Ok(HyperPosteriorSamples { samples, log_posterior, mean_evaluations_per_sweep: evaluations as f64 / sweeps as f64 })
}

/// Coordinate-wise mean of the samples.
pub fn posterior_mean_hypers(samples: &HyperPosteriorSamples) -> Result<Hyperparams> {
    let first = samples.samples.first().ok_or(Error::EmptyDataset)?;
    let mut acc = vec![0.0; first.to_vec().len()];
    for s in &samples.samples {
        for (a, v) in acc.iter_mut().zip(s.to_vec()) {
            *a += v;
        }
    }
    let n = samples.samples.len() as f64;
    Hyperparams::from_slice(&acc.iter().map(|a| a / n).collect::<Vec<_>>())
}

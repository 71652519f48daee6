//! Acquisition functions, their optimizer and the outer optimization loop.
//!
//! PES scores a candidate `x` by the expected drop in predictive entropy of
//! `y(x)` once the location of the global maximizer is known, averaged over
//! `M` slots, each holding one hyperparameter draw and one maximizer sample:
//!
//! ```text
//! α(x) = 1/M Σᵢ ½ log(vᵢ(x) + σᵢ²) - ½ log(vᵢ(x | x⋆ᵢ) + σᵢ²)
//! ```

mod bo;
mod optimize;

pub use bo::{bo_loop, BoAbort, BoConfig, BoRunState, HyperModel, Method};
pub use optimize::{optimize_acquisition, recommend, AcqOptimizer};

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ep::{build_z_prior, ep_refine, ConditionedPredictor, EpCache};
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpPosterior, Hyperparams};
use crate::hyper::{posterior_mean_hypers, slice_sample_hypers_with, HyperPrior, SliceSchedule};
use crate::normal::{cdf, pdf};
use crate::rng::SeedStream;
use crate::spectral::{sample_maximizer_with, MaximizerSample, PathOptimizer};

/// How the `M` slots obtain their hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiMode {
    /// One posterior draw per slot.
    Bayes,
    /// The posterior mean, replicated across slots.
    Fixed,
}

/// Draws `count` slot hyperparameters by slice sampling.
pub fn draw_slot_hypers<R: Rng + ?Sized>(
    data: &Dataset,
    prior: &HyperPrior,
    schedule: &SliceSchedule,
    count: usize,
    mode: PsiMode,
    rng: &mut R,
) -> Result<Vec<Hyperparams>> {
    let samples = slice_sample_hypers_with(data, prior, count, schedule, rng)?;
    Ok(match mode {
        PsiMode::Bayes => samples.samples,
        PsiMode::Fixed => vec![posterior_mean_hypers(&samples)?; count],
    })
}

/// Sizes for [`pes_precompute`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PesConfig {
    /// Random features per sample path.
    pub features: usize,
    pub path_optimizer: PathOptimizer,
}

impl Default for PesConfig {
    fn default() -> Self {
        Self { features: crate::spectral::DEFAULT_FEATURES, path_optimizer: PathOptimizer::default() }
    }
}

/// One `(ψ, x⋆)` pair with its EP state.
#[derive(Debug, Clone)]
pub struct PesSlot {
    pub hyperparams: Hyperparams,
    pub xstar: MaximizerSample,
    pub cache: EpCache,
    gp_index: usize,
    predictor: ConditionedPredictor,
}

impl PesSlot {
    pub fn predictor(&self) -> &ConditionedPredictor {
        &self.predictor
    }
}

/// Everything PES needs to score candidates on a fixed dataset.
#[derive(Debug, Clone)]
pub struct AcquisitionContext {
    slots: Vec<PesSlot>,
    /// Distinct GP posteriors; slots sharing `ψ` share one.
    gps: Vec<GpPosterior>,
    data_len: usize,
    build_time: Duration,
}

/// Entropy reduction `½ log((v + σ²)/(v_cond + σ²))` for one slot.
pub fn entropy_reduction(variance: f64, conditioned_variance: f64, noise_variance: f64) -> f64 {
    0.5 * ((variance + noise_variance) / (conditioned_variance + noise_variance)).ln()
}

/// Builds one slot per hyperparameter vector: sample a maximizer, condition
/// on it, run EP, and factor the joint predictive system. Slot `i` draws from
/// `seed.child(i)`.
pub fn pes_precompute(data: &Dataset, hypers: &[Hyperparams], config: &PesConfig, seed: SeedStream) -> Result<AcquisitionContext> {
    let start = Instant::now();
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if hypers.is_empty() {
        return Err(Error::InvalidArgument("at least one slot is required".into()));
    }
    let y_max = data.y_max().ok_or(Error::EmptyDataset)?;

    let mut gps: Vec<GpPosterior> = Vec::new();
    let mut gp_of_slot = Vec::with_capacity(hypers.len());
    for (i, hp) in hypers.iter().enumerate() {
        if i > 0 && *hp == hypers[i - 1] {
            gp_of_slot.push(gps.len() - 1);
        } else {
            gps.push(GpPosterior::new(data, hp)?);
            gp_of_slot.push(gps.len() - 1);
        }
    }

    let slots = hypers
        .par_iter()
        .enumerate()
        .map(|(i, hp)| {
            let xstar = sample_maximizer_with(data, hp, config.features, &config.path_optimizer, seed.child(i as u64))?;
            let prior = build_z_prior(data, &xstar, hp)?;
            let cache = ep_refine(&prior, y_max, hp.noise_variance())?;
            let predictor = ConditionedPredictor::new(&cache, data, &xstar, hp)?;
            Ok(PesSlot { hyperparams: hp.clone(), xstar, cache, gp_index: gp_of_slot[i], predictor })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AcquisitionContext { slots, gps, data_len: data.len(), build_time: start.elapsed() })
}

impl AcquisitionContext {
    pub fn slots(&self) -> &[PesSlot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Number of observations the context was built on.
    pub fn data_len(&self) -> usize {
        self.data_len
    }

    pub fn build_time(&self) -> Duration {
        self.build_time
    }

    /// Slots whose EP iteration hit the sweep limit; they still contribute.
    pub fn unconverged(&self) -> usize {
        self.slots.iter().filter(|s| !s.cache.converged()).count()
    }

    pub fn gp(&self, slot: usize) -> &GpPosterior {
        &self.gps[self.slots[slot].gp_index]
    }

    pub fn maximizers(&self) -> impl Iterator<Item = &MaximizerSample> {
        self.slots.iter().map(|s| &s.xstar)
    }

    /// PES value at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let mut variances = Vec::with_capacity(self.gps.len());
        for gp in &self.gps {
            variances.push(gp.predict(x)?.1);
        }
        let mut total = 0.0;
        for slot in &self.slots {
            let cond = slot.predictor.predict(x)?.variance();
            total += entropy_reduction(variances[slot.gp_index], cond, slot.hyperparams.noise_variance());
        }
        Ok(total / self.slots.len() as f64)
    }

    /// Slot-averaged posterior mean.
    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        slot_average(&self.gps, self.slots.iter().map(|s| s.gp_index), x)
    }
}

fn slot_average(gps: &[GpPosterior], slot_gps: impl Iterator<Item = usize>, x: &[f64]) -> Result<f64> {
    let means = gps.iter().map(|g| g.predict_mean(x)).collect::<Result<Vec<_>>>()?;
    let (mut sum, mut n) = (0.0, 0usize);
    for i in slot_gps {
        sum += means[i];
        n += 1;
    }
    Ok(sum / n as f64)
}

/// Eq. 8 at `x`.
pub fn pes_acquisition(ctx: &AcquisitionContext, x: &[f64]) -> Result<f64> {
    ctx.evaluate(x)
}

/// Closed-form expected improvement over `incumbent` for a Gaussian
/// predictive `N(mean, variance)`.
pub fn expected_improvement(mean: f64, variance: f64, incumbent: f64) -> f64 {
    let delta = mean - incumbent;
    let s = variance.max(0.0).sqrt();
    if s < 1e-300 {
        return delta.max(0.0);
    }
    let z = delta / s;
    (delta * cdf(z) + s * pdf(z)).max(0.0)
}

/// Expected improvement averaged over hyperparameter slots; each slot's
/// incumbent is the largest posterior mean at an observed input.
#[derive(Debug, Clone)]
pub struct EiContext {
    gps: Vec<GpPosterior>,
    weights: Vec<usize>,
    incumbents: Vec<f64>,
}

pub fn ei_precompute(data: &Dataset, hypers: &[Hyperparams]) -> Result<EiContext> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if hypers.is_empty() {
        return Err(Error::InvalidArgument("at least one slot is required".into()));
    }
    let mut gps: Vec<GpPosterior> = Vec::new();
    let mut weights: Vec<usize> = Vec::new();
    for (i, hp) in hypers.iter().enumerate() {
        if i > 0 && *hp == hypers[i - 1] {
            *weights.last_mut().expect("previous slot") += 1;
        } else {
            gps.push(GpPosterior::new(data, hp)?);
            weights.push(1);
        }
    }
    let incumbents = gps
        .iter()
        .map(|gp| data.inputs().iter().map(|x| gp.predict_mean(x)).try_fold(f64::NEG_INFINITY, |m, v| v.map(|v| m.max(v))))
        .collect::<Result<Vec<_>>>()?;
    Ok(EiContext { gps, weights, incumbents })
}

impl EiContext {
    pub fn incumbents(&self) -> &[f64] {
        &self.incumbents
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for ((gp, w), eta) in self.gps.iter().zip(&self.weights).zip(&self.incumbents) {
            let (m, v) = gp.predict(x)?;
            total += *w as f64 * expected_improvement(m, v, *eta);
            n += w;
        }
        Ok(total / n as f64)
    }

    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        let slots = self.weights.iter().enumerate().flat_map(|(i, w)| std::iter::repeat_n(i, *w));
        slot_average(&self.gps, slots, x)
    }
}

pub fn ei_acquisition(ctx: &EiContext, x: &[f64]) -> Result<f64> {
    ctx.evaluate(x)
}

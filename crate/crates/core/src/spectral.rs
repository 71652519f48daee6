//! Random Fourier features and approximate posterior sample paths.
//!
//! For the SE kernel the normalized spectral density is `N(0, diag(ℓ⁻²))`
//! and the normalizer is `α = γ²`, so `φ(x) = √(2α/m) cos(Wx + b)` satisfies
//! `E[φ(x)ᵀφ(x')] = k(x, x')`. A Bayesian linear model on `φ` with a
//! standard normal prior on the weights is then a finite-rank stand-in for
//! the GP, and its posterior draws are cheap analytic functions that can be
//! maximized to sample the location of the global maximum.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::derivatives::upper_pairs;
use crate::design::latin_hypercube;
use crate::error::{check_dim, Error, Result};
use crate::gp::{Dataset, Domain, Hyperparams};
use crate::linalg::Factor;
use crate::rng::SeedStream;

/// Default number of random features.
pub const DEFAULT_FEATURES: usize = 1000;

/// `m` frequencies drawn from the spectral density, `m` uniform phases and
/// the normalizer `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBasis {
    /// Row-major `m × d`.
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    alpha: f64,
    dim: usize,
}

impl FeatureBasis {
    pub fn from_parts(frequencies: DMatrix<f64>, phases: Vec<f64>, alpha: f64) -> Result<Self> {
        check_dim(frequencies.nrows(), phases.len())?;
        if !(alpha > 0.0) || frequencies.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("feature basis needs finite frequencies and α > 0".into()));
        }
        let dim = frequencies.ncols();
        let frequencies = frequencies.transpose().as_slice().to_vec();
        Ok(Self { frequencies, phases, alpha, dim })
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Frequency row `k`.
    pub fn frequency(&self, k: usize) -> &[f64] {
        &self.frequencies[k * self.dim..(k + 1) * self.dim]
    }

    /// `√(2α/m)`
    pub fn scale(&self) -> f64 {
        (2.0 * self.alpha / self.len() as f64).sqrt()
    }

    #[inline]
    fn argument(&self, k: usize, x: &[f64]) -> f64 {
        let w = self.frequency(k);
        let mut a = self.phases[k];
        for (wi, xi) in w.iter().zip(x) {
            a += wi * xi;
        }
        a
    }

    /// `φ(x) = √(2α/m) cos(Wx + b)`
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let c = self.scale();
        Ok((0..self.len()).map(|k| c * self.argument(k, x).cos()).collect())
    }

    /// Feature matrix `Φ` with one row per input.
    pub fn feature_matrix(&self, inputs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let mut phi = DMatrix::zeros(inputs.len(), self.len());
        for (i, x) in inputs.iter().enumerate() {
            for (k, v) in self.features(x)?.into_iter().enumerate() {
                phi[(i, k)] = v;
            }
        }
        Ok(phi)
    }
}

/// Draws `m` frequencies from `N(0, diag(ℓ⁻²))` and phases from `U[0, 2π)`.
pub fn sample_basis<R: Rng + ?Sized>(hp: &Hyperparams, m: usize, rng: &mut R) -> Result<FeatureBasis> {
    if m == 0 {
        return Err(Error::InvalidArgument("feature count must be at least 1".into()));
    }
    let d = hp.dim();
    let mut frequencies = Vec::with_capacity(m * d);
    let mut phases = Vec::with_capacity(m);
    for _ in 0..m {
        for l in hp.lengthscales() {
            let z: f64 = StandardNormal.sample(rng);
            frequencies.push(z / l);
        }
        phases.push(rng.random::<f64>() * TAU);
    }
    Ok(FeatureBasis { frequencies, phases, alpha: hp.amplitude(), dim: d })
}

/// How to draw the weight posterior `N(A⁻¹Φᵀy, σ²A⁻¹)`, `A = ΦᵀΦ + σ²I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightSampler {
    /// `Dual` when `n < m`, otherwise `Primal`.
    #[default]
    Auto,
    /// Factorizes the `m × m` matrix `A`.
    Primal,
    /// Perturbs a prior draw with an `n × n` solve:
    /// `θ = ε + Φᵀ(ΦΦᵀ + σ²I)⁻¹(y - Φε - σε')`, cost `O(n²m)`.
    Dual,
}

/// Exact draw of the feature weights given the data.
pub fn sample_weights<R: Rng + ?Sized>(
    basis: &FeatureBasis,
    data: &Dataset,
    hp: &Hyperparams,
    method: WeightSampler,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dim(basis.dim(), data.dim())?;
    let m = basis.len();
    let n = data.len();
    let prior: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
    if n == 0 {
        return Ok(prior);
    }
    let noise = hp.noise_variance();
    let phi = basis.feature_matrix(data.inputs())?;
    let y = DVector::from_column_slice(data.outputs());
    let method = match method {
        WeightSampler::Auto if n < m => WeightSampler::Dual,
        WeightSampler::Auto => WeightSampler::Primal,
        other => other,
    };
    match method {
        WeightSampler::Dual => {
            let eps = DVector::from_vec(prior);
            let mut gram = &phi * phi.transpose();
            for i in 0..n {
                gram[(i, i)] += noise;
            }
            let factor = Factor::new(&gram, hp.amplitude(), "ΦΦᵀ + σ²I")?;
            let obs_noise = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
            let residual = &y - &phi * &eps - obs_noise * noise.sqrt();
            let theta = eps + phi.transpose() * factor.solve(&residual);
            Ok(theta.as_slice().to_vec())
        }
        _ => {
            let mut a = phi.transpose() * &phi;
            for i in 0..m {
                a[(i, i)] += noise;
            }
            let factor = Factor::new(&a, 1.0, "ΦᵀΦ + σ²I")?;
            let mean = factor.solve(&(phi.transpose() * &y));
            let eps = DVector::from_vec(prior);
            let spread = factor
                .l()
                .tr_solve_lower_triangular(&eps)
                .ok_or(Error::NotPositiveDefinite { what: "ΦᵀΦ + σ²I", jitter: factor.jitter() })?;
            Ok((mean + spread * noise.sqrt()).as_slice().to_vec())
        }
    }
}

/// A single approximate posterior function `f(x) = φ(x)ᵀθ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    basis: FeatureBasis,
    weights: Vec<f64>,
}

/// Value, gradient and Hessian of a sample path at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDerivatives {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

impl SamplePath {
    pub fn new(basis: FeatureBasis, weights: Vec<f64>) -> Result<Self> {
        check_dim(basis.len(), weights.len())?;
        Ok(Self { basis, weights })
    }

    pub fn basis(&self) -> &FeatureBasis {
        &self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (k, t) in self.weights.iter().enumerate() {
            s += t * self.basis.argument(k, x).cos();
        }
        self.basis.scale() * s
    }

    /// `value = φᵀθ`, `gradient = -c Wᵀ(sin(Wx+b) ⊙ θ)`,
    /// `Hessian = -c Wᵀ diag(cos(Wx+b) ⊙ θ) W` with `c = √(2α/m)`.
    pub fn eval_grad_hess(&self, x: &[f64]) -> Result<PathDerivatives> {
        check_dim(self.dim(), x.len())?;
        Ok(self.derivatives(x))
    }

    fn derivatives(&self, x: &[f64]) -> PathDerivatives {
        let d = self.dim();
        let mut value = 0.0;
        let mut gradient = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        for (k, t) in self.weights.iter().enumerate() {
            let w = self.basis.frequency(k);
            let (s, c) = self.basis.argument(k, x).sin_cos();
            value += t * c;
            let ts = t * s;
            let tc = t * c;
            for i in 0..d {
                gradient[i] -= ts * w[i];
                let twi = tc * w[i];
                for j in i..d {
                    hess[i * d + j] -= twi * w[j];
                }
            }
        }
        let scale = self.basis.scale();
        let hessian = DMatrix::from_fn(d, d, |i, j| scale * if i <= j { hess[i * d + j] } else { hess[j * d + i] });
        gradient.iter_mut().for_each(|g| *g *= scale);
        PathDerivatives { value: scale * value, gradient, hessian }
    }
}

/// A sampled global maximizer of one sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximizerSample {
    pub location: Vec<f64>,
    pub value: f64,
    /// `∂²f/∂xᵢ∂xⱼ` for `i < j` in row-major order.
    pub hessian_upper: Vec<f64>,
    /// Whether any coordinate sits on the domain boundary, where a zero
    /// gradient need not hold.
    pub on_boundary: bool,
}

/// Multi-start policy for maximizing a sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOptimizer {
    /// Latin hypercube starts per input dimension.
    pub starts_per_dim: usize,
    /// Ascents run from this many starts with the highest path value.
    pub local_starts: usize,
    pub max_steps: usize,
    pub gradient_tolerance: f64,
}

impl Default for PathOptimizer {
    fn default() -> Self {
        Self { starts_per_dim: 10, local_starts: 5, max_steps: 200, gradient_tolerance: 1e-8 }
    }
}

struct LocalResult {
    x: Vec<f64>,
    value: f64,
}

impl PathOptimizer {
    /// Best local maximum over Latin hypercube starts plus `extra_starts`,
    /// ascending from the `local_starts` best of them.
    pub fn maximize<R: Rng + ?Sized>(
        &self,
        path: &SamplePath,
        domain: &Domain,
        extra_starts: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<MaximizerSample> {
        check_dim(domain.dim(), path.dim())?;
        let mut starts = latin_hypercube(domain, self.starts_per_dim * domain.dim(), rng);
        starts.extend(extra_starts.iter().filter(|x| x.len() == domain.dim()).cloned());
        let mut screened: Vec<(f64, Vec<f64>)> = starts
            .into_iter()
            .map(|mut x| {
                domain.clip(&mut x);
                (path.value(&x), x)
            })
            .collect();
        screened.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut best: Option<LocalResult> = None;
        for (_, s) in screened.into_iter().take(self.local_starts.max(1)) {
            let r = self.ascend(path, domain, s);
            if best.as_ref().is_none_or(|b| r.value > b.value) {
                best = Some(r);
            }
        }
        let best = best.expect("at least one start");
        let d = domain.dim();
        let hess = path.derivatives(&best.x).hessian;
        let on_boundary = (0..d).any(|i| best.x[i] <= domain.lower()[i] || best.x[i] >= domain.upper()[i]);
        Ok(MaximizerSample {
            hessian_upper: upper_pairs(d).map(|(i, j)| hess[(i, j)]).collect(),
            location: best.x,
            value: best.value,
            on_boundary,
        })
    }

    /// Projected Newton ascent with a gradient fallback and backtracking.
    fn ascend(&self, path: &SamplePath, domain: &Domain, mut x: Vec<f64>) -> LocalResult {
        let d = domain.dim();
        domain.clip(&mut x);
        let (lo, hi) = (domain.lower(), domain.upper());
        let mut current = path.derivatives(&x);
        for _ in 0..self.max_steps {
            let g = &current.gradient;
            let free: Vec<usize> = (0..d)
                .filter(|&i| !((x[i] <= lo[i] && g[i] < 0.0) || (x[i] >= hi[i] && g[i] > 0.0)))
                .collect();
            let pg: f64 = free.iter().map(|&i| g[i] * g[i]).sum::<f64>().sqrt();
            if free.is_empty() || pg < self.gradient_tolerance {
                break;
            }
            let mut dir = vec![0.0; d];
            let neg_h = DMatrix::from_fn(free.len(), free.len(), |a, b| -current.hessian[(free[a], free[b])]);
            let newton = nalgebra::Cholesky::new(neg_h)
                .map(|c| c.solve(&DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]))));
            match newton {
                Some(p) => {
                    for (a, &i) in free.iter().enumerate() {
                        dir[i] = p[a];
                    }
                }
                None => {
                    let shortest = (0..d).map(|i| domain.width(i)).fold(f64::INFINITY, f64::min);
                    let t = 0.25 * shortest / pg;
                    for &i in &free {
                        dir[i] = t * g[i];
                    }
                }
            }
            for i in 0..d {
                let cap = 0.5 * domain.width(i);
                dir[i] = dir[i].clamp(-cap, cap);
            }
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let mut cand: Vec<f64> = (0..d).map(|i| x[i] + step * dir[i]).collect();
                domain.clip(&mut cand);
                let gain: f64 = (0..d).map(|i| g[i] * (cand[i] - x[i])).sum();
                let v = path.value(&cand);
                if v > current.value + 1e-4 * gain && v > current.value {
                    accepted = Some(cand);
                    break;
                }
                step *= 0.5;
            }
            let Some(next) = accepted else { break };
            let moved: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = next;
            current = path.derivatives(&x);
            if moved < 1e-15 {
                break;
            }
        }
        LocalResult { value: current.value, x }
    }
}

/// Maximizes a sample path with the default multi-start policy, adding the
/// observed inputs as starts.
pub fn optimize_path<R: Rng + ?Sized>(
    path: &SamplePath,
    domain: &Domain,
    extra_starts: &[Vec<f64>],
    rng: &mut R,
) -> Result<MaximizerSample> {
    PathOptimizer::default().maximize(path, domain, extra_starts, rng)
}

/// Draws one sample path of the posterior and its maximizer.
pub fn sample_maximizer(data: &Dataset, hp: &Hyperparams, features: usize, seed: SeedStream) -> Result<MaximizerSample> {
    sample_maximizer_with(data, hp, features, &PathOptimizer::default(), seed)
}

/// [`sample_maximizer`] with an explicit path optimizer.
pub fn sample_maximizer_with(
    data: &Dataset,
    hp: &Hyperparams,
    features: usize,
    optimizer: &PathOptimizer,
    seed: SeedStream,
) -> Result<MaximizerSample> {
    let mut rng = seed.rng();
    let basis = sample_basis(hp, features, &mut rng)?;
    let weights = sample_weights(&basis, data, hp, WeightSampler::Auto, &mut rng)?;
    let path = SamplePath::new(basis, weights)?;
    optimizer.maximize(&path, data.domain(), data.inputs(), &mut rng)
}

/// `count` independent maximizer samples; sample `i` uses stream
/// `seed.child(i)`, so the output does not depend on the thread count.
pub fn sample_maximizers(
    data: &Dataset,
    hp: &Hyperparams,
    count: usize,
    features: usize,
    seed: SeedStream,
) -> Result<Vec<MaximizerSample>> {
    if count == 0 {
        return Err(Error::InvalidArgument("at least one maximizer sample is required".into()));
    }
    check_dim(data.dim(), hp.dim())?;
    (0..count)
        .into_par_iter()
        .map(|i| sample_maximizer(data, hp, features, seed.child(i as u64)))
        .collect()
}

/// Jittered copy of a point, used to seed local searches near maximizers.
pub(crate) fn perturb<R: Rng + ?Sized>(x: &[f64], domain: &Domain, relative: f64, rng: &mut R) -> Vec<f64> {
    let mut p: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| v + Normal::new(0.0, relative * domain.width(i)).unwrap().sample(rng))
        .collect();
    domain.clip(&mut p);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::kernel_se;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_hp(d: usize) -> Hyperparams {
        Hyperparams::isotropic(1.0, 0.1f64.sqrt(), d, 1e-6).unwrap()
    }

    #[test]
    fn alpha_is_amplitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_basis(&paper_hp(2), 10, &mut rng).unwrap().alpha(), 1.0);
        let hp = Hyperparams::isotropic(2.5, 0.3, 2, 1e-3).unwrap();
        assert_eq!(sample_basis(&hp, 10, &mut rng).unwrap().alpha(), 2.5);
        assert!(sample_basis(&hp, 0, &mut rng).is_err());
    }

    #[test]
    fn frequency_variance_matches_lengthscales() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hp = Hyperparams::new(1.0, vec![0.3, 1.5], 1e-3).unwrap();
        let m = 100_000;
        let basis = sample_basis(&hp, m, &mut rng).unwrap();
        for (j, l) in hp.lengthscales().iter().enumerate() {
            let var = (0..m).map(|k| basis.frequency(k)[j].powi(2)).sum::<f64>() / m as f64;
            let target = l.powi(-2);
            assert!((var / target - 1.0).abs() < 0.03, "dim {j}: {var} vs {target}");
        }
    }

    #[test]
    fn phases_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = 100_000;
        let basis = sample_basis(&paper_hp(1), m, &mut rng).unwrap();
        let mut bins = [0usize; 10];
        for b in basis.phases() {
            assert!((0.0..TAU).contains(b));
            bins[((b / TAU) * 10.0) as usize] += 1;
        }
        for c in bins {
            assert!((c as f64 / (m as f64 / 10.0) - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn feature_norm_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hp = Hyperparams::isotropic(1.7, 0.2, 3, 1e-3).unwrap();
        let basis = sample_basis(&hp, 500, &mut rng).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let n2: f64 = basis.features(&x).unwrap().iter().map(|v| v * v).sum();
            assert!(n2 <= 2.0 * basis.alpha() + 1e-12);
        }
        assert!(basis.features(&[0.1]).is_err());
    }

    #[test]
    fn inner_product_mean_matches_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let hp = paper_hp(2);
        let pairs: Vec<([f64; 2], [f64; 2])> =
            (0..5).map(|_| ([rng.random(), rng.random()], [rng.random(), rng.random()])).collect();
        for (x, y) in pairs {
            let mut acc = 0.0;
            for _ in 0..200 {
                let b = sample_basis(&hp, 1000, &mut rng).unwrap();
                let (fx, fy) = (b.features(&x).unwrap(), b.features(&y).unwrap());
                acc += fx.iter().zip(&fy).map(|(a, b)| a * b).sum::<f64>();
            }
            assert!((acc / 200.0 - kernel_se(&x, &y, &hp).unwrap()).abs() < 0.05);
        }
    }

    #[test]
    fn approximation_error_halves_with_four_times_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hp = paper_hp(2);
        let pairs: Vec<([f64; 2], [f64; 2])> =
            (0..40).map(|_| ([rng.random(), rng.random()], [rng.random(), rng.random()])).collect();
        let rms = |m: usize, rng: &mut ChaCha8Rng| {
            let mut sq = 0.0;
            let mut count = 0.0;
            for _ in 0..100 {
                let b = sample_basis(&hp, m, rng).unwrap();
                for (x, y) in &pairs {
                    let (fx, fy) = (b.features(x).unwrap(), b.features(y).unwrap());
                    let approx: f64 = fx.iter().zip(&fy).map(|(a, b)| a * b).sum();
                    sq += (approx - kernel_se(x, y, &hp).unwrap()).powi(2);
                    count += 1.0;
                }
            }
            (sq / count).sqrt()
        };
        let ratio = rms(250, &mut rng) / rms(1000, &mut rng);
        assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let hp = Hyperparams::new(1.0, vec![0.3, 0.5], 1e-3).unwrap();
        let basis = sample_basis(&hp, 300, &mut rng).unwrap();
        let weights: Vec<f64> = (0..300).map(|_| StandardNormal.sample(&mut rng)).collect();
        let path = SamplePath::new(basis, weights).unwrap();
        let h = 1e-6;
        for _ in 0..50 {
            let x = vec![rng.random::<f64>(), rng.random::<f64>()];
            let der = path.eval_grad_hess(&x).unwrap();
            let gnorm = der.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
            for i in 0..2 {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[i] += h;
                xm[i] -= h;
                let fd = (path.value(&xp) - path.value(&xm)) / (2.0 * h);
                assert!((fd - der.gradient[i]).abs() < 1e-5 * gnorm.max(1.0), "{fd} {}", der.gradient[i]);
                let gp = path.eval_grad_hess(&xp).unwrap().gradient;
                let gm = path.eval_grad_hess(&xm).unwrap().gradient;
                for j in 0..2 {
                    let fdh = (gp[j] - gm[j]) / (2.0 * h);
                    assert!((fdh - der.hessian[(j, i)]).abs() < 1e-4 * der.hessian.amax().max(1.0));
                }
            }
            assert_eq!(der.hessian, der.hessian.transpose());
        }
    }

    #[test]
    fn single_cosine_path() {
        let basis = FeatureBasis::from_parts(DMatrix::from_element(1, 1, 2.0), vec![0.5], 0.5).unwrap();
        let path = SamplePath::new(basis, vec![1.0]).unwrap();
        // c = √(2·0.5/1) = 1
        let x = [0.3];
        assert!((path.value(&x) - (2.0 * 0.3 + 0.5f64).cos()).abs() < 1e-15);
        for target in [0.0, std::f64::consts::PI] {
            let x = [(target - 0.5) / 2.0];
            assert!(path.eval_grad_hess(&x).unwrap().gradient[0].abs() < 1e-15);
        }
    }

    fn random_path(rng: &mut ChaCha8Rng, d: usize, m: usize) -> SamplePath {
        let hp = Hyperparams::isotropic(1.0, 0.3, d, 1e-3).unwrap();
        let basis = sample_basis(&hp, m, rng).unwrap();
        let weights = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        SamplePath::new(basis, weights).unwrap()
    }

    #[test]
    fn interior_optimum_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let domain = Domain::unit(2);
        let mut checked = 0;
        for _ in 0..20 {
            let path = random_path(&mut rng, 2, 500);
            let best = optimize_path(&path, &domain, &[], &mut rng).unwrap();
            assert!(domain.contains(&best.location));
            if !best.on_boundary {
                let g = path.eval_grad_hess(&best.location).unwrap().gradient;
                assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-6);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn one_dimensional_path_beats_dense_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let domain = Domain::unit(1);
        for _ in 0..10 {
            let path = random_path(&mut rng, 1, 500);
            let best = optimize_path(&path, &domain, &[], &mut rng).unwrap();
            let grid_max = (0..10_000).map(|i| path.value(&[i as f64 / 9999.0])).fold(f64::NEG_INFINITY, f64::max);
            assert!(best.value >= grid_max - 1e-6);
            assert!((best.value - path.value(&best.location)).abs() < 1e-12);
        }
    }

    #[test]
    fn increasing_path_hits_upper_boundary() {
        // cos(x - 2) is increasing on [0, 1]
        let basis = FeatureBasis::from_parts(DMatrix::from_element(1, 1, 1.0), vec![-2.0], 0.5).unwrap();
        let path = SamplePath::new(basis, vec![1.0]).unwrap();
        let vals: Vec<f64> = (0..=100).map(|i| path.value(&[i as f64 / 100.0])).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let best = optimize_path(&path, &Domain::unit(1), &[], &mut rng).unwrap();
        assert_eq!(best.location, vec![1.0]);
        assert!(best.on_boundary);
        assert!(best.hessian_upper.is_empty());
    }

    #[test]
    fn prior_weights_standard_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let hp = paper_hp(1);
        let basis = sample_basis(&hp, 4, &mut rng).unwrap();
        let empty = Dataset::new(Domain::unit(1));
        let draws = 100_000;
        let mut mean = [0.0; 4];
        for _ in 0..draws {
            let w = sample_weights(&basis, &empty, &hp, WeightSampler::Auto, &mut rng).unwrap();
            for k in 0..4 {
                mean[k] += w[k] / draws as f64;
            }
        }
        assert!(mean.iter().all(|m| m.abs() < 0.02), "{mean:?}");
    }

    #[test]
    fn maximizer_samples_deterministic() {
        let hp = Hyperparams::isotropic(1.0, 0.3, 2, 1e-3).unwrap();
        let data = Dataset::from_pairs(Domain::unit(2), vec![vec![0.2, 0.3], vec![0.8, 0.6]], vec![0.5, -0.2]).unwrap();
        let a = sample_maximizers(&data, &hp, 4, 200, SeedStream::new(3)).unwrap();
        let b = sample_maximizers(&data, &hp, 4, 200, SeedStream::new(3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        assert!(sample_maximizers(&data, &hp, 0, 200, SeedStream::new(3)).is_err());
    }
}

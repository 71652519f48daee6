//! Squared-exponential Gaussian process regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_dim, Error, Result};
use crate::linalg::Factor;

/// Kernel amplitude `γ²`, per-dimension lengthscales `ℓᵢ` and observation
/// noise variance `σ²`. All strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHyperparams")]
pub struct Hyperparams {
    amplitude: f64,
    lengthscales: Vec<f64>,
    noise_variance: f64,
}

#[derive(Deserialize)]
struct RawHyperparams {
    amplitude: f64,
    lengthscales: Vec<f64>,
    noise_variance: f64,
}

impl TryFrom<RawHyperparams> for Hyperparams {
    type Error = Error;

    fn try_from(raw: RawHyperparams) -> Result<Self> {
        Hyperparams::new(raw.amplitude, raw.lengthscales, raw.noise_variance)
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl Hyperparams {
    pub fn new(amplitude: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::InvalidArgument("at least one lengthscale is required".into()));
        }
        if !positive(amplitude) || !positive(noise_variance) || !lengthscales.iter().all(|l| positive(*l)) {
            return Err(Error::InvalidArgument(format!(
                "hyperparameters must be finite and positive (amplitude {amplitude}, lengthscales {lengthscales:?}, noise {noise_variance})"
            )));
        }
        Ok(Self { amplitude, lengthscales, noise_variance })
    }

    /// Same lengthscale `ℓ` in every one of `dim` dimensions.
    pub fn isotropic(amplitude: f64, lengthscale: f64, dim: usize, noise_variance: f64) -> Result<Self> {
        Self::new(amplitude, vec![lengthscale; dim], noise_variance)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        Self::new(self.amplitude, self.lengthscales.clone(), noise_variance)
    }

    /// `[γ², ℓ₁..ℓ_d, σ²]`
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim() + 2);
        v.push(self.amplitude);
        v.extend_from_slice(&self.lengthscales);
        v.push(self.noise_variance);
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() < 3 {
            return Err(Error::InvalidArgument("hyperparameter vector needs at least 3 entries".into()));
        }
        Self::new(v[0], v[1..v.len() - 1].to_vec(), v[v.len() - 1])
    }
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidArgument("domain needs at least one dimension".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid bounds {lower:?} / {upper:?}")));
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Self { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Maps a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().enumerate().map(|(i, v)| self.lower[i] + v * self.width(i)).collect()
    }
}

/// Observations `(xᵢ, yᵢ)` inside a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    domain: Domain,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(domain: Domain) -> Self {
        Self { domain, inputs: Vec::new(), outputs: Vec::new() }
    }

    pub fn from_pairs(domain: Domain, inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        check_dim(inputs.len(), outputs.len())?;
        let mut data = Self::new(domain);
        for (x, y) in inputs.into_iter().zip(outputs) {
            data.push(x, y)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        check_dim(self.domain.dim(), x.len())?;
        if !self.domain.contains(&x) {
            return Err(Error::InvalidArgument(format!("input {x:?} lies outside the domain")));
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation"));
        }
        self.inputs.push(x);
        self.outputs.push(y);
        Ok(())
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    /// Largest observed output, `None` when empty.
    pub fn y_max(&self) -> Option<f64> {
        self.outputs.iter().copied().reduce(f64::max)
    }
}

/// `γ² exp{-½ Σ (xᵢ - x'ᵢ)² / ℓᵢ²}`
pub fn kernel_se(x: &[f64], x2: &[f64], hp: &Hyperparams) -> Result<f64> {
    check_dim(hp.dim(), x.len())?;
    check_dim(hp.dim(), x2.len())?;
    Ok(se(x, x2, hp))
}

#[inline]
pub(crate) fn se(x: &[f64], x2: &[f64], hp: &Hyperparams) -> f64 {
    let mut q = 0.0;
    for ((a, b), l) in x.iter().zip(x2).zip(&hp.lengthscales) {
        let r = (a - b) / l;
        q += r * r;
    }
    hp.amplitude * (-0.5 * q).exp()
}

/// `K(X, X) + σ² I` without jitter.
pub fn noisy_kernel_matrix(inputs: &[Vec<f64>], hp: &Hyperparams) -> DMatrix<f64> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = se(&inputs[i], &inputs[j], hp);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += hp.noise_variance;
    }
    k
}

/// GP posterior given a dataset and fixed hyperparameters.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    hp: Hyperparams,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    factor: Option<Factor>,
    weights: DVector<f64>,
}

impl GpPosterior {
    pub fn new(data: &Dataset, hp: &Hyperparams) -> Result<Self> {
        check_dim(data.dim(), hp.dim())?;
        let mut gp = Self {
            hp: hp.clone(),
            inputs: data.inputs().to_vec(),
            outputs: data.outputs().to_vec(),
            factor: None,
            weights: DVector::zeros(0),
        };
        if !gp.inputs.is_empty() {
            let k = noisy_kernel_matrix(&gp.inputs, hp);
            let factor = Factor::new(&k, hp.amplitude, "K + σ²I")?;
            gp.weights = factor.solve(&DVector::from_column_slice(&gp.outputs));
            gp.factor = Some(factor);
        }
        Ok(gp)
    }

    /// Posterior after appending one observation, reusing the current
    /// factorization.
    pub fn with_observation(&self, x: &[f64], y: f64) -> Result<Self> {
        check_dim(self.hp.dim(), x.len())?;
        let cross: Vec<f64> = self.inputs.iter().map(|xi| se(xi, x, &self.hp)).collect();
        let diag = self.hp.amplitude + self.hp.noise_variance;
        let factor = match &self.factor {
            Some(f) => f.append(&cross, diag)?,
            None => Factor::new(&DMatrix::from_element(1, 1, diag), self.hp.amplitude, "K + σ²I")?,
        };
        let mut inputs = self.inputs.clone();
        inputs.push(x.to_vec());
        let mut outputs = self.outputs.clone();
        outputs.push(y);
        let weights = factor.solve(&DVector::from_column_slice(&outputs));
        Ok(Self { hp: self.hp.clone(), inputs, outputs, factor: Some(factor), weights })
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn factor(&self) -> Option<&Factor> {
        self.factor.as_ref()
    }

    /// `(K_n + σ²I)⁻¹ y_n`
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// `K_n + σ²I` exactly as factorized (before jitter).
    pub fn noisy_kernel_matrix(&self) -> DMatrix<f64> {
        noisy_kernel_matrix(&self.inputs, &self.hp)
    }

    fn cross(&self, x: &[f64]) -> Vec<f64> {
        self.inputs.iter().map(|xi| se(xi, x, &self.hp)).collect()
    }

    /// Posterior mean `μ_n(x)` and variance `v_n(x)` of the latent function.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.hp.dim(), x.len())?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> (f64, f64) {
        let prior = self.hp.amplitude;
        let Some(factor) = &self.factor else {
            return (0.0, prior);
        };
        let mut k = self.cross(x);
        let mean = k.iter().zip(self.weights.iter()).map(|(a, b)| a * b).sum();
        factor.forward_solve_in_place(&mut k);
        let reduction: f64 = k.iter().map(|v| v * v).sum();
        let var = (prior - reduction).clamp(f64::MIN_POSITIVE, prior);
        (mean, var)
    }

    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.hp.dim(), x.len())?;
        Ok(self.cross(x).iter().zip(self.weights.iter()).map(|(a, b)| a * b).sum())
    }

    /// `log N(y_n | 0, K_n + σ²I)`
    pub fn log_marginal_likelihood(&self) -> Result<f64> {
        let factor = self.factor.as_ref().ok_or(Error::EmptyDataset)?;
        let n = self.inputs.len() as f64;
        let fit: f64 = self.outputs.iter().zip(self.weights.iter()).map(|(y, w)| y * w).sum();
        Ok(-0.5 * fit - 0.5 * factor.log_det() - 0.5 * n * (2.0 * PI).ln())
    }
}

pub fn log_marginal_likelihood(data: &Dataset, hp: &Hyperparams) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    GpPosterior::new(data, hp)?.log_marginal_likelihood()
}

/// Entropy in nats of a Gaussian with the given variance.
pub fn gaussian_entropy(variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::InvalidArgument(format!("variance must be positive, got {variance}")));
    }
    Ok(0.5 * (2.0 * PI * std::f64::consts::E * variance).ln())
}

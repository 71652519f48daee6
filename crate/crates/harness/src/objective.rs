//! Objectives with a known global maximum.

use pes::acquisition::{optimize_acquisition, AcqOptimizer};
use pes::gp::Domain;
use pes::rng::SeedStream;
use serde::{Deserialize, Serialize};

use crate::constants::*;
use crate::error::{HarnessError, Result};

/// A function maximized over its domain with a certified optimum.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;
    fn domain(&self) -> &Domain;
    /// Noise-free value.
    fn value(&self, x: &[f64]) -> Result<f64>;
    /// Global maximum value.
    fn optimum(&self) -> f64;
    /// Variance of the noise added to observations.
    fn noise_variance(&self) -> f64;

    /// Immediate regret `|f(x) - f⋆|`.
    fn regret(&self, x: &[f64]) -> Result<f64> {
        Ok((self.optimum() - self.value(x)?).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkName {
    Branin,
    Cosines,
    Hartmann6,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 3] = [BenchmarkName::Branin, BenchmarkName::Cosines, BenchmarkName::Hartmann6];

    pub fn as_str(&self) -> &'static str {
        match self {
            BenchmarkName::Branin => "branin",
            BenchmarkName::Cosines => "cosines",
            BenchmarkName::Hartmann6 => "hartmann6",
        }
    }
}

impl std::str::FromStr for BenchmarkName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "branin" | "braninhoo" => Ok(BenchmarkName::Branin),
            "cosines" => Ok(BenchmarkName::Cosines),
            "hartmann6" | "hartmann" => Ok(BenchmarkName::Hartmann6),
            _ => Err(HarnessError::Config(format!("unknown benchmark `{s}`"))),
        }
    }
}

/// Negated Branin-Hoo on the unit square.
pub fn branin(u: &[f64]) -> f64 {
    let x1 = BRANIN_LOWER[0] + u[0] * (BRANIN_UPPER[0] - BRANIN_LOWER[0]);
    let x2 = BRANIN_LOWER[1] + u[1] * (BRANIN_UPPER[1] - BRANIN_LOWER[1]);
    let q = x2 - BRANIN_B * x1 * x1 + BRANIN_C * x1 - BRANIN_R;
    -(BRANIN_A * q * q + BRANIN_S * (1.0 - BRANIN_T) * x1.cos() + BRANIN_S)
}

/// Cosine mixture on the unit square.
pub fn cosines(u: &[f64]) -> f64 {
    1.0 - u
        .iter()
        .map(|ui| {
            let t = COSINES_SCALE * ui - COSINES_SHIFT;
            t * t - COSINES_AMPLITUDE * (COSINES_FREQUENCY * t).cos()
        })
        .sum::<f64>()
}

/// Negated Hartmann-6 on the unit hypercube.
pub fn hartmann6(u: &[f64]) -> f64 {
    HARTMANN6_ALPHA
        .iter()
        .zip(HARTMANN6_A.iter().zip(&HARTMANN6_P))
        .map(|(alpha, (a, p))| {
            let e: f64 = (0..6).map(|j| a[j] * (u[j] - p[j]).powi(2)).sum();
            alpha * (-e).exp()
        })
        .sum()
}

/// A named synthetic benchmark on the unit box.
#[derive(Debug, Clone)]
pub struct Benchmark {
    name: BenchmarkName,
    domain: Domain,
    f: fn(&[f64]) -> f64,
    optimum: f64,
    maximizers: Vec<Vec<f64>>,
    noise_variance: f64,
}

impl Benchmark {
    pub fn new(name: BenchmarkName) -> Self {
        let (dim, f, optimum, maximizers): (usize, fn(&[f64]) -> f64, f64, Vec<Vec<f64>>) = match name {
            BenchmarkName::Branin => {
                let to_unit = |x: &[f64; 2]| {
                    (0..2).map(|i| (x[i] - BRANIN_LOWER[i]) / (BRANIN_UPPER[i] - BRANIN_LOWER[i])).collect()
                };
                (2, branin, -BRANIN_MIN, BRANIN_ARGMIN.iter().map(to_unit).collect())
            }
            BenchmarkName::Cosines => (2, cosines, COSINES_MAX, vec![COSINES_ARGMAX.to_vec()]),
            BenchmarkName::Hartmann6 => (6, hartmann6, -HARTMANN6_MIN, vec![HARTMANN6_ARGMIN.to_vec()]),
        };
        Self { name, domain: Domain::unit(dim), f, optimum, maximizers, noise_variance: BENCHMARK_NOISE_VARIANCE }
    }

    pub fn kind(&self) -> BenchmarkName {
        self.name
    }

    /// Known global maximizers.
    pub fn maximizers(&self) -> &[Vec<f64>] {
        &self.maximizers
    }

    /// Checks the declared optimum against a dense search: a grid in 2-D,
    /// a Latin hypercube otherwise, each followed by compass polishing.
    /// Returns the best point found.
    pub fn certify(&self, tolerance: f64) -> Result<(Vec<f64>, f64)> {
        let d = self.domain.dim();
        let anchors: Vec<Vec<f64>> = if d == 2 {
            let res = 400;
            let mut pts: Vec<(f64, Vec<f64>)> = (0..res * res)
                .map(|k| {
                    let x = vec![((k % res) as f64 + 0.5) / res as f64, ((k / res) as f64 + 0.5) / res as f64];
                    ((self.f)(&x), x)
                })
                .collect();
            pts.sort_by(|a, b| b.0.total_cmp(&a.0));
            pts.into_iter().take(20).map(|p| p.1).collect()
        } else {
            Vec::new()
        };
        let opts = AcqOptimizer {
            lhs_per_dim: if d == 2 { 5 } else { 1000 },
            perturbations_per_anchor: 0,
            local_starts: 40,
            initial_step: 0.02,
            final_step: 1e-10,
            max_evaluations: 20_000,
            ..AcqOptimizer::default()
        };
        let mut rng = SeedStream::new(0).named(self.name.as_str()).rng();
        let (x, v) = optimize_acquisition(self.f, &self.domain, &anchors, &opts, &mut rng);
        let at_declared = self.maximizers.iter().map(|m| (self.f)(m)).fold(f64::NEG_INFINITY, f64::max);
        let ok = (v - self.optimum).abs() <= tolerance
            && (at_declared - self.optimum).abs() <= tolerance
            && v <= self.optimum + tolerance;
        if !ok {
            return Err(HarnessError::Certification { name: self.name.as_str().into(), found: v, declared: self.optimum });
        }
        Ok((x, v))
    }
}

impl Objective for Benchmark {
    fn name(&self) -> &str {
        self.name.as_str()
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.domain.dim() || !self.domain.contains(x) {
            return Err(HarnessError::OutOfDomain(x.to_vec()));
        }
        Ok((self.f)(x))
    }

    fn optimum(&self) -> f64 {
        self.optimum
    }

    fn noise_variance(&self) -> f64 {
        self.noise_variance
    }
}

//! Invariant checks run by `pes selftest` and the acceptance suite.

use pes::acquisition::{bo_loop, pes_precompute, BoConfig, HyperModel, Method, PesConfig};
use pes::derivatives::{covariance, Derivative, Observable};
use pes::gp::{Dataset, Domain, GpPosterior, Hyperparams};
use pes::rng::SeedStream;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::validate::{toy_data, ValidationConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }

    fn error(name: &str, e: impl std::fmt::Display) -> Self {
        Self::new(name, false, format!("error: {e}"))
    }
}

/// Lowest acquisition value accepted.
pub const ACQ_FLOOR: f64 = -1e-6;
/// Slack on variance bounds.
pub const VARIANCE_SLACK: f64 = 1e-12;
/// Relative tolerance of the finite-difference checks.
pub const FD_TOLERANCE: f64 = 1e-5;

fn grid2(res: usize) -> Vec<Vec<f64>> {
    (0..res * res).map(|k| vec![(k % res) as f64 / (res - 1) as f64, (k / res) as f64 / (res - 1) as f64]).collect()
}

/// Acquisition nonnegativity and conditioned-variance bounds on a 50×50
/// grid of the toy problem.
pub fn check_acquisition_bounds(seed: u64) -> Vec<Check> {
    let cfg = ValidationConfig { seed, ..ValidationConfig::default() };
    let run = || -> pes::error::Result<(f64, f64, f64, usize)> {
        let hp = cfg.hyperparams().expect("valid defaults");
        let data = toy_data(&cfg, SeedStream::new(seed).named("data")).map_err(|e| pes::error::Error::Objective(e.to_string()))?;
        let ctx = pes_precompute(&data, &vec![hp; 20], &PesConfig::default(), SeedStream::new(seed).named("pes"))?;
        let (mut min_alpha, mut min_var, mut max_excess) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let pts = grid2(50);
        for x in &pts {
            min_alpha = min_alpha.min(ctx.evaluate(x)?);
            for slot in ctx.slots() {
                let p = slot.predictor().predict(x)?;
                min_var = min_var.min(p.variance());
                max_excess = max_excess.max(p.variance() - p.cov[0][0]);
            }
        }
        Ok((min_alpha, min_var, max_excess, pts.len()))
    };
    match run() {
        Ok((a, v, e, n)) => vec![
            Check::new("acquisition nonnegative", a >= ACQ_FLOOR, format!("min over {n} points = {a:e}")),
            Check::new("conditioned variance within [0, V11]", v >= 0.0 && e <= VARIANCE_SLACK, format!("min {v:e}, max excess {e:e}")),
        ],
        Err(e) => vec![Check::error("acquisition nonnegative", &e), Check::error("conditioned variance within [0, V11]", &e)],
    }
}

/// Posterior variance at test points never grows as observations arrive.
pub fn check_variance_monotone(seed: u64) -> Check {
    let mut rng = SeedStream::new(seed).named("monotone").rng();
    let hp = Hyperparams::new(1.3, vec![0.2, 0.35], 1e-3).expect("valid constants");
    let tests: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random(), rng.random()]).collect();
    let mut data = Dataset::new(Domain::unit(2));
    let mut prev = vec![hp.amplitude(); tests.len()];
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..30 {
        if data.push(vec![rng.random(), rng.random()], rng.random_range(-1.0..1.0)).is_err() {
            return Check::new("posterior variance monotone", false, "push failed".into());
        }
        let gp = match GpPosterior::new(&data, &hp) {
            Ok(g) => g,
            Err(e) => return Check::error("posterior variance monotone", e),
        };
        for (x, p) in tests.iter().zip(prev.iter_mut()) {
            let v = gp.predict(x).map(|r| r.1).unwrap_or(f64::NAN);
            worst = worst.max(v - *p);
            *p = v;
        }
    }
    Check::new("posterior variance monotone", worst <= VARIANCE_SLACK, format!("largest increase {worst:e}"))
}

/// Every covariance involving a derivative matches a central difference of
/// the covariance one order lower.
pub fn check_derivative_covariances(seed: u64) -> Check {
    let mut rng = SeedStream::new(seed).named("fd").rng();
    let d = 3;
    let hp = Hyperparams::new(1.7, vec![0.4, 0.7, 1.1], 1e-2).expect("valid constants");
    let h = 1e-5;
    let mut kinds = vec![Derivative::Value];
    kinds.extend((0..d).map(Derivative::First));
    for i in 0..d {
        for j in i..d {
            kinds.push(Derivative::Second(i, j));
        }
    }
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for _ in 0..5 {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        for &kb in &kinds {
            let b = Observable { point: y.clone(), derivative: kb, noisy: false };
            // (lower, extra index, higher) triples on the left argument
            let mut pairs = Vec::new();
            for i in 0..d {
                pairs.push((Derivative::Value, i, Derivative::First(i)));
                for j in 0..d {
                    let (lo, hi) = (i.min(j), i.max(j));
                    pairs.push((Derivative::First(j), i, Derivative::Second(lo, hi)));
                }
            }
            for (lower, i, higher) in pairs {
                let at = |s: f64| {
                    let mut p = x.clone();
                    p[i] += s;
                    covariance(&Observable { point: p, derivative: lower, noisy: false }, &b, &hp)
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                let exact = covariance(&Observable { point: x.clone(), derivative: higher, noisy: false }, &b, &hp);
                worst = worst.max((fd - exact).abs() / (1.0 + exact.abs()));
                count += 1;
            }
        }
    }
    Check::new("derivative covariances match finite differences", worst < FD_TOLERANCE, format!("{count} checks, worst relative error {worst:e}"))
}

/// Repeated runs under one seed agree bit for bit.
pub fn check_determinism(seed: u64) -> Check {
    let run = || -> pes::error::Result<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
        let cfg = ValidationConfig { seed, ..ValidationConfig::default() };
        let hp = cfg.hyperparams().expect("valid defaults");
        let data = toy_data(&cfg, SeedStream::new(seed).named("data")).map_err(|e| pes::error::Error::Objective(e.to_string()))?;
        let ctx = pes_precompute(&data, &vec![hp.clone(); 8], &PesConfig::default(), SeedStream::new(seed).named("det"))?;
        let surface = grid2(10).iter().map(|x| ctx.evaluate(x)).collect::<pes::error::Result<Vec<f64>>>()?;
        let mut bo = BoConfig::new(Method::Pes, 2, HyperModel::Known(hp));
        bo.samples = 4;
        let f = |x: &[f64]| Ok(-(x[0] - 0.3).powi(2) - (x[1] - 0.6).powi(2));
        let state = bo_loop(f, &Domain::unit(2), &bo, SeedStream::new(seed).named("loop")).map_err(|a| a.error)?;
        Ok((surface, state.recommendations, state.data.outputs().to_vec()))
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => Check::new("fixed seeds reproduce results", a == b, "acquisition surface and optimization loop".into()),
        (Err(e), _) | (_, Err(e)) => Check::error("fixed seeds reproduce results", e),
    }
}

/// The whole suite.
pub fn run_selftest(seed: u64) -> Vec<Check> {
    let mut checks = check_acquisition_bounds(seed);
    checks.push(check_variance_monotone(seed));
    checks.push(check_derivative_covariances(seed));
    checks.push(check_determinism(seed));
    checks
}

//! Derivative-free multi-start maximization over a box.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::latin_hypercube;
use crate::error::{Error, Result};
use crate::gp::{Dataset, Domain};
use crate::spectral::perturb;

/// Start set and local search controls.
///
/// Starts are a Latin hypercube followed by every anchor point and
/// `perturbations_per_anchor` jittered copies of it. All starts are
/// screened, then compass search runs from the `local_starts` best.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcqOptimizer {
    pub lhs_per_dim: usize,
    pub perturbations_per_anchor: usize,
    /// Jitter standard deviation relative to the domain width.
    pub perturbation_scale: f64,
    pub local_starts: usize,
    /// Initial and final compass step, relative to the domain width.
    pub initial_step: f64,
    pub final_step: f64,
    pub max_evaluations: usize,
}

impl Default for AcqOptimizer {
    fn default() -> Self {
        Self {
            lhs_per_dim: 20,
            perturbations_per_anchor: 1,
            perturbation_scale: 0.02,
            local_starts: 5,
            initial_step: 0.05,
            final_step: 1e-6,
            max_evaluations: 400,
        }
    }
}

impl AcqOptimizer {
    fn starts<R: Rng + ?Sized>(&self, domain: &Domain, anchors: &[Vec<f64>], rng: &mut R) -> Vec<Vec<f64>> {
        let mut starts = latin_hypercube(domain, (self.lhs_per_dim * domain.dim()).max(1), rng);
        for a in anchors.iter().filter(|a| a.len() == domain.dim()) {
            let mut p = a.clone();
            domain.clip(&mut p);
            starts.push(p);
            for _ in 0..self.perturbations_per_anchor {
                starts.push(perturb(a, domain, self.perturbation_scale, rng));
            }
        }
        starts
    }

    /// Compass search moving only on strict improvement.
    fn polish<F: Fn(&[f64]) -> f64>(&self, f: &F, domain: &Domain, mut x: Vec<f64>, mut fx: f64) -> (Vec<f64>, f64) {
        let d = domain.dim();
        let mut step = self.initial_step;
        let mut evals = 0;
        while step >= self.final_step && evals < self.max_evaluations {
            let mut best: Option<(Vec<f64>, f64)> = None;
            for i in 0..d {
                for sign in [1.0, -1.0] {
                    let mut cand = x.clone();
                    cand[i] += sign * step * domain.width(i);
                    domain.clip(&mut cand);
                    if cand[i] == x[i] {
                        continue;
                    }
                    let v = sanitize(f(&cand));
                    evals += 1;
                    if v > fx && best.as_ref().is_none_or(|b| v > b.1) {
                        best = Some((cand, v));
                    }
                }
            }
            match best {
                Some((cand, v)) => {
                    x = cand;
                    fx = v;
                }
                None => step *= 0.5,
            }
        }
        (x, fx)
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Maximizes `f` over `domain`. Ties go to the lowest start index, so a
/// constant objective returns the first start point.
pub fn optimize_acquisition<F, R>(f: F, domain: &Domain, anchors: &[Vec<f64>], options: &AcqOptimizer, rng: &mut R) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let starts = options.starts(domain, anchors, rng);
    let mut screened: Vec<(usize, f64)> = starts.iter().enumerate().map(|(i, x)| (i, sanitize(f(x)))).collect();
    // stable sort keeps index order among equal values
    screened.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for &(i, v) in screened.iter().take(options.local_starts.max(1)) {
        let (x, fx) = options.polish(&f, domain, starts[i].clone(), v);
        let better = match &best {
            None => true,
            Some((bi, _, bv)) => fx > *bv || (fx == *bv && i < *bi),
        };
        if better {
            best = Some((i, x, fx));
        }
    }
    let (_, x, v) = best.expect("at least one start");
    (x, v)
}

/// Maximizer of a posterior mean, searched from the observed inputs and a
/// Latin hypercube.
pub fn recommend<F, R>(mean: F, data: &Dataset, options: &AcqOptimizer, rng: &mut R) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(optimize_acquisition(mean, data.domain(), data.inputs(), options, rng).0)
}

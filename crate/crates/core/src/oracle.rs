//! Ground truth for the PES acquisition on a discretized domain.
//!
//! The maximizer distribution is sampled by drawing the posterior jointly
//! over grid cells and taking the argmax. Draws whose argmax is a given cell
//! are exactly the draws a rejection sampler for that `x⋆` would keep, so
//! grouping the draws by argmax yields samples of `f(x) | x⋆` for every cell
//! at once. Their entropies come from a Gaussian kernel density estimate.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gp::{gaussian_entropy, se, Domain, GpPosterior};
use crate::linalg::Factor;
use crate::rng::SeedStream;

/// Largest number of grid cells accepted.
pub const MAX_CELLS: usize = 1_000_000;
/// Smallest sample accepted by [`kde_entropy`].
pub const MIN_KDE_SAMPLES: usize = 20;
/// Default minimum number of draws per maximizer cell.
pub const ACCEPTANCE_FLOOR: usize = 20;

/// Uniform grid of cell centers over a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    domain: Domain,
    resolution: Vec<usize>,
}

impl GridSpec {
    pub fn new(domain: Domain, resolution: Vec<usize>) -> Result<Self> {
        check_dim(domain.dim(), resolution.len())?;
        if resolution.iter().any(|r| *r < 2) {
            return Err(Error::InvalidArgument("grid resolution must be at least 2 per dimension".into()));
        }
        let cells = resolution.iter().try_fold(1usize, |a, r| a.checked_mul(*r));
        if cells.is_none_or(|c| c > MAX_CELLS) {
            return Err(Error::InvalidArgument(format!("grid exceeds {MAX_CELLS} cells")));
        }
        Ok(Self { domain, resolution })
    }

    /// `res` cells per dimension.
    pub fn square(domain: Domain, res: usize) -> Result<Self> {
        let d = domain.dim();
        Self::new(domain, vec![res; d])
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Center of cell `index`; the first dimension varies fastest.
    pub fn center(&self, mut index: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.resolution.len());
        for (i, r) in self.resolution.iter().enumerate() {
            let k = index % r;
            index /= r;
            x.push(self.domain.lower()[i] + (k as f64 + 0.5) / *r as f64 * self.domain.width(i));
        }
        x
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }
}

/// Joint posterior of the latent function at `points`.
pub fn posterior_joint(gp: &GpPosterior, points: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let hp = gp.hyperparams();
    for p in points {
        check_dim(hp.dim(), p.len())?;
    }
    let n = points.len();
    let mut cov = DMatrix::from_fn(n, n, |i, j| se(&points[i], &points[j], hp));
    let mean = DVector::from_iterator(n, points.iter().map(|p| gp.predict_mean(p).expect("dimension checked")));
    if let Some(factor) = gp.factor() {
        let cross = DMatrix::from_fn(gp.len(), n, |i, j| se(&gp.inputs()[i], &points[j], hp));
        cov -= cross.transpose() * factor.solve_matrix(&cross);
    }
    Ok((mean, (&cov + cov.transpose()) * 0.5))
}

/// Exact joint sampler over a fixed point set.
#[derive(Debug, Clone)]
pub struct JointSampler {
    mean: DVector<f64>,
    l: DMatrix<f64>,
    jitter: f64,
}

impl JointSampler {
    pub fn new(gp: &GpPosterior, points: &[Vec<f64>]) -> Result<Self> {
        let (mean, cov) = posterior_joint(gp, points)?;
        let factor = Factor::new(&cov, gp.hyperparams().amplitude(), "grid posterior covariance")?;
        Ok(Self { mean, l: factor.l(), jitter: factor.jitter() })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    fn normals(count: usize, dim: usize, seed: SeedStream) -> DMatrix<f64> {
        let mut rng = seed.rng();
        DMatrix::from_fn(dim, count, |_, _| StandardNormal.sample(&mut rng))
    }

    /// `count` draws as columns; the draws depend only on `seed`.
    pub fn sample(&self, count: usize, seed: SeedStream) -> DMatrix<f64> {
        let z = Self::normals(count, self.len(), seed);
        let mut f = &self.l * z;
        for mut col in f.column_iter_mut() {
            col += &self.mean;
        }
        f
    }

    /// Rows `rows` of the draws [`JointSampler::sample`] would return for
    /// the same `seed`.
    pub fn sample_rows(&self, rows: &[usize], count: usize, seed: SeedStream) -> DMatrix<f64> {
        let z = Self::normals(count, self.len(), seed);
        let sub = DMatrix::from_fn(rows.len(), self.len(), |i, j| self.l[(rows[i], j)]);
        let mut f = sub * z;
        for (i, &r) in rows.iter().enumerate() {
            for v in f.row_mut(i).iter_mut() {
                *v += self.mean[r];
            }
        }
        f
    }
}

/// `count` exact posterior draws over the grid cells, one per column.
pub fn joint_grid_samples(gp: &GpPosterior, grid: &GridSpec, count: usize, seed: SeedStream) -> Result<DMatrix<f64>> {
    check_dim(grid.domain().dim(), gp.hyperparams().dim())?;
    Ok(JointSampler::new(gp, &grid.centers())?.sample(count, seed))
}

/// Silverman's bandwidth `1.06 σ̂ n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    1.06 * var.sqrt() * n.powf(-0.2)
}

/// Above this size the density is evaluated on a binned grid.
const EXACT_LIMIT: usize = 4000;
/// Kernel support in bandwidths.
const KERNEL_REACH: f64 = 8.0;
/// Bins per bandwidth for the binned estimate.
const BINS_PER_BANDWIDTH: f64 = 8.0;

/// Resubstitution estimate `-1/n Σ log f̂(yᵢ)` in nats, with a Gaussian
/// kernel and Silverman's bandwidth. Returns `-∞` for samples without
/// spread.
pub fn kde_entropy(samples: &[f64]) -> Result<f64> {
    if samples.len() < MIN_KDE_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "kernel entropy needs at least {MIN_KDE_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("entropy samples"));
    }
    let h = silverman_bandwidth(samples);
    if !(h > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(if sorted.len() <= EXACT_LIMIT { exact_entropy(&sorted, h) } else { binned_entropy(&sorted, h) })
}

fn exact_entropy(sorted: &[f64], h: f64) -> f64 {
    let n = sorted.len();
    let reach = KERNEL_REACH * h;
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut lo = 0;
    let mut total = 0.0;
    for i in 0..n {
        let y = sorted[i];
        while sorted[lo] < y - reach {
            lo += 1;
        }
        let mut dens = 0.0;
        for &v in sorted[lo..].iter().take_while(|v| **v <= y + reach) {
            let u = (y - v) / h;
            dens += (-0.5 * u * u).exp();
        }
        total += (dens * norm).ln();
    }
    -total / n as f64
}

fn binned_entropy(sorted: &[f64], h: f64) -> f64 {
    let n = sorted.len() as f64;
    let delta = h / BINS_PER_BANDWIDTH;
    let lo = sorted[0];
    let bins = ((sorted[sorted.len() - 1] - lo) / delta).ceil() as usize + 2;
    let mut w = vec![0.0; bins];
    for &v in sorted {
        let t = (v - lo) / delta;
        let k = (t.floor() as usize).min(bins - 2);
        let frac = t - k as f64;
        w[k] += 1.0 - frac;
        w[k + 1] += frac;
    }
    let reach = (KERNEL_REACH * BINS_PER_BANDWIDTH).ceil() as usize;
    let kernel: Vec<f64> = (0..=reach).map(|j| (-0.5 * (j as f64 * delta / h).powi(2)).exp()).collect();
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut total = 0.0;
    for b in 0..bins {
        if w[b] == 0.0 {
            continue;
        }
        let mut dens = w[b] * kernel[0];
        for j in 1..=reach.min(b.max(bins - 1 - b)) {
            if b >= j {
                dens += w[b - j] * kernel[j];
            }
            if b + j < bins {
                dens += w[b + j] * kernel[j];
            }
        }
        total += w[b] * (dens * norm).ln();
    }
    -total / n
}

/// Sample sizes for [`rs_acquisition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsConfig {
    /// Joint posterior draws over the grid.
    pub samples: usize,
    /// Draws generated per batch; each batch has its own child stream.
    pub batch: usize,
    /// Cells with fewer draws are dropped from the `x⋆` expectation.
    pub acceptance_floor: usize,
    /// Candidate points processed together in the second pass.
    pub chunk: usize,
}

impl Default for RsConfig {
    fn default() -> Self {
        Self { samples: 50_000, batch: 1000, acceptance_floor: ACCEPTANCE_FLOOR, chunk: 64 }
    }
}

/// Rejection-sampling estimate of the acquisition at each candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsEstimate {
    /// `α(x)`; `NaN` where no cell passed the floor.
    pub values: Vec<f64>,
    /// `H[p(y | D, x)]`, analytic.
    pub first_term: Vec<f64>,
    /// `E_{x⋆} H[p(y | D, x, x⋆)]`, estimated.
    pub second_term: Vec<f64>,
    /// Approximate standard error of `second_term`.
    pub std_errors: Vec<f64>,
    /// Draws whose argmax fell in each grid cell.
    pub cell_counts: Vec<usize>,
    /// Per grid cell, the fraction of draws a rejection sampler for that
    /// cell would discard.
    pub rejection_rates: Vec<f64>,
    /// Cells kept in the expectation.
    pub kept_cells: Vec<usize>,
    /// `conditional_entropy[x][k]` for cell `kept_cells[k]`.
    pub conditional_entropy: Vec<Vec<f64>>,
    pub samples: usize,
}

/// Estimates `α(x) = H[p(y|D,x)] - E_{x⋆}[H[p(y|D,x,x⋆)]]` for every
/// candidate `x`.
pub fn rs_acquisition(
    gp: &GpPosterior,
    grid: &GridSpec,
    candidates: &[Vec<f64>],
    noise_variance: f64,
    config: &RsConfig,
    seed: SeedStream,
) -> Result<RsEstimate> {
    if config.samples < 1000 {
        return Err(Error::InvalidArgument("rejection sampling needs at least 1000 joint samples".into()));
    }
    if !(noise_variance > 0.0) {
        return Err(Error::InvalidArgument("noise variance must be positive".into()));
    }
    let cells = grid.len();
    let mut points = grid.centers();
    // candidates on a cell center reuse that cell's row
    let mut candidate_rows = Vec::with_capacity(candidates.len());
    for x in candidates {
        check_dim(grid.domain().dim(), x.len())?;
        match points[..cells].iter().position(|c| c == x) {
            Some(i) => candidate_rows.push(i),
            None => {
                candidate_rows.push(points.len());
                points.push(x.clone());
            }
        }
    }
    let sampler = JointSampler::new(gp, &points)?;
    let batches: Vec<(usize, usize)> =
        (0..config.samples).step_by(config.batch.max(1)).map(|s| (s, config.batch.max(1).min(config.samples - s))).collect();
    let batch_seed = |b: usize| seed.named("joint").child(b as u64);

    // pass 1: argmax cell of every draw
    let argmax: Vec<usize> = batches
        .par_iter()
        .enumerate()
        .map(|(b, &(_, count))| {
            let f = sampler.sample(count, batch_seed(b));
            f.column_iter()
                .map(|col| {
                    let mut best = 0;
                    for i in 1..cells {
                        if col[i] > col[best] {
                            best = i;
                        }
                    }
                    best
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat();
    let mut cell_counts = vec![0usize; cells];
    for &c in &argmax {
        cell_counts[c] += 1;
    }
    let total = config.samples as f64;
    let rejection_rates = cell_counts.iter().map(|c| 1.0 - *c as f64 / total).collect();
    let kept_cells: Vec<usize> = (0..cells).filter(|c| cell_counts[*c] >= config.acceptance_floor).collect();
    let kept_total: usize = kept_cells.iter().map(|c| cell_counts[*c]).sum();
    let mut slot_of_cell = vec![usize::MAX; cells];
    for (k, c) in kept_cells.iter().enumerate() {
        slot_of_cell[*c] = k;
    }
    let weights: Vec<f64> = kept_cells.iter().map(|c| cell_counts[*c] as f64 / kept_total as f64).collect();

    // pass 2: noisy values at the candidates, grouped by argmax cell
    let sd = noise_variance.sqrt();
    let m = candidates.len();
    let mut first_term = Vec::with_capacity(m);
    for x in candidates {
        first_term.push(gaussian_entropy(gp.predict(x)?.1 + noise_variance)?);
    }
    let mut second_term = vec![f64::NAN; m];
    let mut std_errors = vec![f64::NAN; m];
    let mut conditional_entropy = vec![Vec::new(); m];
    for (chunk_index, chunk_start) in (0..m).step_by(config.chunk.max(1)).enumerate() {
        let rows: Vec<usize> = candidate_rows[chunk_start..(chunk_start + config.chunk.max(1)).min(m)].to_vec();
        // groups[x][k] holds the draws for candidate x whose argmax is kept cell k
        let mut groups: Vec<Vec<Vec<f64>>> = vec![kept_cells.iter().map(|c| Vec::with_capacity(cell_counts[*c])).collect(); rows.len()];
        for (b, &(start, count)) in batches.iter().enumerate() {
            let f = sampler.sample_rows(&rows, count, batch_seed(b));
            let mut noise_rng = seed.named("noise").child(chunk_index as u64).child(b as u64).rng();
            for s in 0..count {
                let slot = slot_of_cell[argmax[start + s]];
                for (r, group) in groups.iter_mut().enumerate() {
                    let eps: f64 = StandardNormal.sample(&mut noise_rng);
                    if slot != usize::MAX {
                        group[slot].push(f[(r, s)] + sd * eps);
                    }
                }
            }
        }
        let results: Vec<(f64, f64, Vec<f64>)> = groups
            .par_iter()
            .map(|group| {
                let mut entropies = Vec::with_capacity(group.len());
                let mut var_terms = 0.0;
                for (k, values) in group.iter().enumerate() {
                    let h = kde_entropy(values).unwrap_or(f64::NAN);
                    entropies.push(h);
                    var_terms += weights[k] * weights[k] * entropy_variance(values);
                }
                if entropies.is_empty() || entropies.iter().any(|h| !h.is_finite()) {
                    return (f64::NAN, f64::NAN, entropies);
                }
                let mean: f64 = entropies.iter().zip(&weights).map(|(h, w)| h * w).sum();
                let spread: f64 = entropies.iter().zip(&weights).map(|(h, w)| w * (h - mean).powi(2)).sum::<f64>() / kept_total as f64;
                (mean, (var_terms + spread).sqrt(), entropies)
            })
            .collect();
        for (r, (mean, se, ents)) in results.into_iter().enumerate() {
            let j = chunk_start + r;
            second_term[j] = mean;
            std_errors[j] = se;
            conditional_entropy[j] = ents;
        }
    }
    let values = first_term.iter().zip(&second_term).map(|(a, b)| a - b).collect();
    Ok(RsEstimate {
        values,
        first_term,
        second_term,
        std_errors,
        cell_counts,
        rejection_rates,
        kept_cells,
        conditional_entropy,
        samples: config.samples,
    })
}

/// Plug-in variance of an entropy estimate, `Var[log f(Y)] / n`, with the
/// Gaussian fit standing in for `f`.
fn entropy_variance(values: &[f64]) -> f64 {
    // for a Gaussian, log f(Y) = const - Z²/2 has variance 1/2
    0.5 / values.len() as f64
}

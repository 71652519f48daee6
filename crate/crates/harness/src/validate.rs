//! Acquisition fidelity on a 2-D toy problem: PES against the
//! rejection-sampling ground truth on a grid.

use std::path::Path;
use std::time::Instant;

use pes::acquisition::{pes_precompute, PesConfig};
use pes::gp::{Dataset, Domain, GpPosterior, Hyperparams};
use pes::oracle::{rs_acquisition, GridSpec, JointSampler, RsConfig};
use pes::rng::SeedStream;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

fn d_observations() -> usize {
    10
}
fn d_grid() -> usize {
    30
}
fn d_samples() -> usize {
    200
}
fn d_features() -> usize {
    1000
}
fn d_rs_samples() -> usize {
    50_000
}
fn d_amplitude() -> f64 {
    1.0
}
fn d_lengthscale_sq() -> f64 {
    0.1
}
fn d_noise() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_observations")]
    pub observations: usize,
    /// Cells per dimension.
    #[serde(default = "d_grid")]
    pub grid: usize,
    /// PES slots `M`.
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_features")]
    pub features: usize,
    /// Joint draws for the rejection sampler.
    #[serde(default = "d_rs_samples")]
    pub rs_samples: usize,
    #[serde(default = "d_amplitude")]
    pub amplitude: f64,
    #[serde(default = "d_lengthscale_sq")]
    pub lengthscale_sq: f64,
    #[serde(default = "d_noise")]
    pub noise_variance: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ValidationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn hyperparams(&self) -> Result<Hyperparams> {
        Ok(Hyperparams::new(self.amplitude, vec![self.lengthscale_sq.sqrt(); 2], self.noise_variance)?)
    }
}

/// One grid cell of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub x0: f64,
    pub x1: f64,
    pub rs: f64,
    pub rs_se: f64,
    pub pes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub spearman: f64,
    pub cells: usize,
    /// Cells with a finite RS estimate.
    pub compared_cells: usize,
    pub pes_argmax_cell: usize,
    pub rs_argmax_cell: usize,
    /// Whether the PES argmax cell is in the top 10% of RS values.
    pub pes_argmax_in_rs_top_decile: bool,
    /// Whether the RS argmax cell is in the top 10% of PES values.
    pub rs_argmax_in_pes_top_decile: bool,
    /// Maximizer cells kept by the acceptance floor.
    pub rs_kept_cells: usize,
    pub unconverged_slots: usize,
    pub pes_seconds: f64,
    pub rs_seconds: f64,
}

/// Ranks with ties averaged, starting at 1.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut r = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

/// Whether `v[i]` is at least the 90th percentile of the finite values.
fn in_top_decile(v: &[f64], i: usize) -> bool {
    let mut finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let cut = finite[((0.9 * (finite.len() - 1) as f64).floor()) as usize];
    v[i] >= cut
}

/// Toy data set: uniform inputs with outputs drawn jointly from the prior
/// plus noise.
pub fn toy_data(cfg: &ValidationConfig, seed: SeedStream) -> Result<Dataset> {
    let hp = cfg.hyperparams()?;
    let domain = Domain::unit(2);
    let mut rng = seed.named("inputs").rng();
    let inputs: Vec<Vec<f64>> = (0..cfg.observations).map(|_| vec![rng.random(), rng.random()]).collect();
    let prior = GpPosterior::new(&Dataset::new(domain.clone()), &hp)?;
    let f = JointSampler::new(&prior, &inputs)?.sample(1, seed.named("latent"));
    let noise = Normal::new(0.0, hp.noise_variance().sqrt()).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut nrng = seed.named("noise").rng();
    let y = f.column(0).iter().map(|v| v + noise.sample(&mut nrng)).collect();
    Ok(Dataset::from_pairs(domain, inputs, y)?)
}

/// Computes both surfaces on the grid and compares them.
pub fn validate_acquisition(cfg: &ValidationConfig) -> Result<(ValidationReport, Vec<GridRow>)> {
    let seed = SeedStream::new(cfg.seed);
    let hp = cfg.hyperparams()?;
    let data = toy_data(cfg, seed.named("data"))?;
    let grid = GridSpec::square(Domain::unit(2), cfg.grid)?;
    let cells = grid.centers();

    let start = Instant::now();
    let pes_cfg = PesConfig { features: cfg.features, ..PesConfig::default() };
    let ctx = pes_precompute(&data, &vec![hp.clone(); cfg.samples], &pes_cfg, seed.named("pes"))?;
    let pes: Vec<f64> = cells.iter().map(|x| ctx.evaluate(x)).collect::<pes::error::Result<_>>()?;
    let pes_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let gp = GpPosterior::new(&data, &hp)?;
    let rs_cfg = RsConfig { samples: cfg.rs_samples, ..RsConfig::default() };
    let rs = rs_acquisition(&gp, &grid, &cells, hp.noise_variance(), &rs_cfg, seed.named("rs"))?;
    let rs_seconds = start.elapsed().as_secs_f64();

    let keep: Vec<usize> = (0..cells.len()).filter(|i| rs.values[*i].is_finite()).collect();
    if keep.len() < 2 {
        return Err(HarnessError::Config("rejection sampler produced fewer than two finite cells".into()));
    }
    let a: Vec<f64> = keep.iter().map(|i| pes[*i]).collect();
    let b: Vec<f64> = keep.iter().map(|i| rs.values[*i]).collect();
    let rs_masked: Vec<f64> = rs.values.iter().map(|v| if v.is_finite() { *v } else { f64::NEG_INFINITY }).collect();
    let pes_argmax_cell = argmax(&pes);
    let rs_argmax_cell = argmax(&rs_masked);
    let report = ValidationReport {
        spearman: spearman(&a, &b),
        cells: cells.len(),
        compared_cells: keep.len(),
        pes_argmax_cell,
        rs_argmax_cell,
        pes_argmax_in_rs_top_decile: in_top_decile(&rs_masked, pes_argmax_cell),
        rs_argmax_in_pes_top_decile: in_top_decile(&pes, rs_argmax_cell),
        rs_kept_cells: rs.kept_cells.len(),
        unconverged_slots: ctx.unconverged(),
        pes_seconds,
        rs_seconds,
    };
    let rows = cells
        .iter()
        .enumerate()
        .map(|(i, x)| GridRow { x0: x[0], x1: x[1], rs: rs.values[i], rs_se: rs.std_errors[i], pes: pes[i] })
        .collect();
    Ok((report, rows))
}

/// Writes `surfaces.csv` and `report.json` into `dir`.
pub fn write_validation(report: &ValidationReport, rows: &[GridRow], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("surfaces.csv"))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

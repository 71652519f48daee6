//! Immediate-regret curves with bootstrap bands.

use rand::Rng;
use serde::{Deserialize, Serialize};

use pes::rng::SeedStream;

/// Median of a non-empty slice; the mean of the two middle values for even
/// lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Standard deviation of the median over `replicates` resamples of the
/// values with replacement.
pub fn bootstrap_median_sd(values: &[f64], replicates: usize, seed: SeedStream) -> f64 {
    if values.len() < 2 || replicates < 2 {
        return 0.0;
    }
    let mut rng = seed.rng();
    let mut buf = vec![0.0; values.len()];
    let meds: Vec<f64> = (0..replicates)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = values[rng.random_range(0..values.len())];
            }
            median(&buf)
        })
        .collect();
    // shifted by the first replicate so identical medians give exactly zero
    let d: Vec<f64> = meds.iter().map(|m| m - meds[0]).collect();
    let n = replicates as f64;
    let (s1, s2) = (d.iter().sum::<f64>(), d.iter().map(|v| v * v).sum::<f64>());
    ((s2 - s1 * s1 / n) / (n - 1.0)).max(0.0).sqrt()
}

/// Percentile interval of a statistic over bootstrap resamples of runs.
pub fn bootstrap_interval<F>(runs: usize, replicates: usize, level: f64, seed: SeedStream, mut statistic: F) -> (f64, f64)
where
    F: FnMut(&[usize]) -> f64,
{
    let mut rng = seed.rng();
    let mut idx = vec![0usize; runs];
    let mut stats: Vec<f64> = (0..replicates)
        .map(|_| {
            for i in idx.iter_mut() {
                *i = rng.random_range(0..runs);
            }
            statistic(&idx)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| stats[((q * (replicates - 1) as f64).round() as usize).min(replicates - 1)];
    (at(tail), at(1.0 - tail))
}

/// Per-iteration regret of every run of one method on one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub method: String,
    pub function: String,
    pub run_ids: Vec<usize>,
    /// `regrets[r][t]` for run `run_ids[r]` after `t` queries.
    pub regrets: Vec<Vec<f64>>,
    pub median: Vec<f64>,
    /// One bootstrap standard deviation of the median.
    pub band: Vec<f64>,
}

impl RegretCurve {
    /// Aggregates runs sorted by id. Runs must share a length.
    pub fn new(method: &str, function: &str, mut runs: Vec<(usize, Vec<f64>)>, replicates: usize, seed: SeedStream) -> Self {
        runs.sort_by_key(|r| r.0);
        let (run_ids, regrets): (Vec<usize>, Vec<Vec<f64>>) = runs.into_iter().unzip();
        let len = regrets.first().map_or(0, Vec::len);
        let column = |t: usize| regrets.iter().map(|r| r[t]).collect::<Vec<f64>>();
        let median = if regrets.is_empty() { Vec::new() } else { (0..len).map(|t| self::median(&column(t))).collect() };
        let band = if regrets.is_empty() {
            Vec::new()
        } else {
            (0..len).map(|t| bootstrap_median_sd(&column(t), replicates, seed.child(t as u64))).collect()
        };
        Self { method: method.into(), function: function.into(), run_ids, regrets, median, band }
    }

    pub fn len(&self) -> usize {
        self.median.len()
    }

    pub fn is_empty(&self) -> bool {
        self.median.is_empty()
    }

    /// Regrets of every run at iteration `t`.
    pub fn at(&self, t: usize) -> Vec<f64> {
        self.regrets.iter().map(|r| r[t]).collect()
    }

    pub fn final_values(&self) -> Vec<f64> {
        self.len().checked_sub(1).map_or_else(Vec::new, |t| self.at(t))
    }
}

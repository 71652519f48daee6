//! Repeated optimization runs, aggregation and result files.

use std::path::Path;

use pes::acquisition::{bo_loop, Method};
use pes::error::Error as ModelError;
use pes::rng::SeedStream;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, FunctionKind};
use crate::error::{HarnessError, Result};
use crate::objective::{Benchmark, Objective};
use crate::regret::RegretCurve;
use crate::within_model::gen_within_model_objective;

/// One completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub method: Method,
    pub function: FunctionKind,
    pub seed: u64,
    /// Recommendation after each number of loop queries.
    pub recommendations: Vec<Vec<f64>>,
    pub regrets: Vec<f64>,
    pub unconverged_slots: usize,
}

/// A run excluded from aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run_id: usize,
    pub method: Method,
    pub function: FunctionKind,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub curves: Vec<RegretCurve>,
}

impl ExperimentResult {
    pub fn curve(&self, method: Method, function: FunctionKind) -> Option<&RegretCurve> {
        self.curves.iter().find(|c| c.method == method.name() && c.function == function.as_str())
    }
}

/// Seed of run `run_id` on `function`, shared by every method.
pub fn run_seed(config: &ExperimentConfig, function: FunctionKind, run_id: usize) -> SeedStream {
    SeedStream::new(config.seed).named(function.as_str()).child(run_id as u64)
}

fn bootstrap_seed(config: &ExperimentConfig, method: &str, function: &str) -> SeedStream {
    SeedStream::new(config.seed).named("bootstrap").named(function).named(method)
}

/// Objective of restart `run_id`.
pub fn make_objective(config: &ExperimentConfig, function: FunctionKind, run_id: usize) -> Result<Box<dyn Objective>> {
    Ok(match function {
        FunctionKind::WithinModel => {
            let seed = SeedStream::new(config.seed).named("objective").child(run_id as u64);
            Box::new(gen_within_model_objective(&config.generating_hypers()?, seed)?)
        }
        FunctionKind::Benchmark(b) => Box::new(Benchmark::new(b)),
    })
}

/// Runs one method on one objective. Observations carry Gaussian noise of
/// the objective's variance.
pub fn run_single(
    config: &ExperimentConfig,
    method: Method,
    function: FunctionKind,
    objective: &dyn Objective,
    run_id: usize,
) -> std::result::Result<RunRecord, RunFailure> {
    let fail = |error: String| RunFailure { run_id, method, function, error };
    let bo = config.bo_config(method, function).map_err(|e| fail(e.to_string()))?;
    let seed = run_seed(config, function, run_id);
    let mut noise_rng = seed.named("noise").rng();
    let noise = Normal::new(0.0, objective.noise_variance().sqrt()).map_err(|e| fail(e.to_string()))?;
    let f = |x: &[f64]| -> pes::error::Result<f64> {
        let v = objective.value(x).map_err(|e| ModelError::Objective(e.to_string()))?;
        Ok(v + noise.sample(&mut noise_rng))
    };
    let state = bo_loop(f, objective.domain(), &bo, seed).map_err(|a| fail(a.to_string()))?;
    let regrets = state
        .recommendations
        .iter()
        .map(|x| objective.regret(x))
        .collect::<Result<Vec<f64>>>()
        .map_err(|e| fail(e.to_string()))?;
    Ok(RunRecord {
        run_id,
        method,
        function,
        seed: seed.seed(),
        recommendations: state.recommendations,
        regrets,
        unconverged_slots: state.unconverged_slots,
    })
}

/// Runs every method on every restart of every function. Restarts run in
/// parallel; results are reduced in run-id order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let tasks: Vec<(FunctionKind, usize)> =
        config.functions.to_vec().into_iter().flat_map(|f| (0..config.restarts).map(move |r| (f, r))).collect();
    let outcomes: Vec<Vec<std::result::Result<RunRecord, RunFailure>>> = tasks
        .par_iter()
        .map(|&(function, run_id)| match make_objective(config, function, run_id) {
            Ok(obj) => config.methods.iter().map(|&m| run_single(config, m, function, obj.as_ref(), run_id)).collect(),
            Err(e) => config
                .methods
                .iter()
                .map(|&method| Err(RunFailure { run_id, method, function, error: e.to_string() }))
                .collect(),
        })
        .collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            Ok(r) => runs.push(r),
            Err(f) => failures.push(f),
        }
    }
    let curves = aggregate(config, &runs);
    Ok(ExperimentResult { config: config.clone(), runs, failures, curves })
}

/// Median curves and bands from per-run regrets.
pub fn aggregate(config: &ExperimentConfig, runs: &[RunRecord]) -> Vec<RegretCurve> {
    let mut curves = Vec::new();
    for function in config.functions.to_vec() {
        for &method in &config.methods {
            let selected: Vec<(usize, Vec<f64>)> = runs
                .iter()
                .filter(|r| r.method == method && r.function == function)
                .map(|r| (r.run_id, r.regrets.clone()))
                .collect();
            let seed = bootstrap_seed(config, method.name(), function.as_str());
            curves.push(RegretCurve::new(method.name(), function.as_str(), selected, config.bootstrap, seed));
        }
    }
    curves
}

/// Aggregates persisted in `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub run_seeds: Vec<(String, usize, u64)>,
    pub curves: Vec<CurveSummary>,
    pub failures: Vec<RunFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub method: String,
    pub function: String,
    pub runs: usize,
    pub median: Vec<f64>,
    pub band: Vec<f64>,
}

impl Summary {
    pub fn new(result: &ExperimentResult) -> Self {
        let mut run_seeds: Vec<(String, usize, u64)> = result
            .config
            .functions
            .to_vec()
            .into_iter()
            .flat_map(|f| (0..result.config.restarts).map(move |r| (f, r)))
            .map(|(f, r)| (f.as_str().to_string(), r, run_seed(&result.config, f, r).seed()))
            .collect();
        run_seeds.dedup();
        Self {
            config: result.config.clone(),
            run_seeds,
            curves: result.curves.iter().map(CurveSummary::from).collect(),
            failures: result.failures.clone(),
        }
    }
}

impl From<&RegretCurve> for CurveSummary {
    fn from(c: &RegretCurve) -> Self {
        Self { method: c.method.clone(), function: c.function.clone(), runs: c.run_ids.len(), median: c.median.clone(), band: c.band.clone() }
    }
}

pub fn curve_file_name(method: &str, function: &str) -> String {
    format!("{function}_{method}.csv")
}

/// Writes one CSV per (method, function) and `summary.json` into `dir`.
pub fn write_results(result: &ExperimentResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for function in result.config.functions.to_vec() {
        for &method in &result.config.methods {
            let mut w = csv::Writer::from_path(dir.join(curve_file_name(method.name(), function.as_str())))?;
            let mut header = vec!["run_id".to_string(), "iteration".to_string()];
            header.extend((0..function.dim()).map(|i| format!("x{i}")));
            header.push("regret".into());
            w.write_record(&header)?;
            let mut runs: Vec<&RunRecord> = result.runs.iter().filter(|r| r.method == method && r.function == function).collect();
            runs.sort_by_key(|r| r.run_id);
            for r in runs {
                for (t, (x, regret)) in r.recommendations.iter().zip(&r.regrets).enumerate() {
                    let mut row = vec![r.run_id.to_string(), t.to_string()];
                    row.extend(x.iter().map(|v| v.to_string()));
                    row.push(regret.to_string());
                    w.write_record(&row)?;
                }
            }
            w.flush()?;
        }
    }
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&Summary::new(result))?)?;
    Ok(())
}

/// Reads per-run regrets back from a curve CSV.
pub fn read_curve_csv(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut runs: Vec<(usize, Vec<f64>)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| rec.get(i).ok_or_else(|| HarnessError::Config(format!("{}: short row", path.display())));
        let run_id: usize = parse(0)?.parse().map_err(|e| HarnessError::Config(format!("run_id: {e}")))?;
        let regret: f64 = parse(rec.len() - 1)?.parse().map_err(|e| HarnessError::Config(format!("regret: {e}")))?;
        match runs.last_mut() {
            Some((id, v)) if *id == run_id => v.push(regret),
            _ => runs.push((run_id, vec![regret])),
        }
    }
    Ok(runs)
}

/// Recomputes the summary of a results directory from its CSV files.
pub fn reaggregate(dir: &Path) -> Result<Summary> {
    let stored: Summary = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json"))?)?;
    let config = &stored.config;
    let mut curves = Vec::new();
    for function in config.functions.to_vec() {
        for &method in &config.methods {
            let runs = read_curve_csv(&dir.join(curve_file_name(method.name(), function.as_str())))?;
            let seed = bootstrap_seed(config, method.name(), function.as_str());
            let c = RegretCurve::new(method.name(), function.as_str(), runs, config.bootstrap, seed);
            curves.push(CurveSummary::from(&c));
        }
    }
    Ok(Summary { curves, ..stored })
}

//! Experiment configuration read from TOML.

use std::path::Path;

use pes::acquisition::{AcqOptimizer, BoConfig, HyperModel, Method, PesConfig};
use pes::gp::Hyperparams;
use pes::hyper::{Gamma, HyperPrior, SliceSchedule};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::objective::BenchmarkName;
use crate::within_model;

/// An objective family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FunctionKind {
    /// A fresh prior draw per restart.
    WithinModel,
    Benchmark(BenchmarkName),
}

impl FunctionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FunctionKind::WithinModel => "within-model",
            FunctionKind::Benchmark(b) => b.as_str(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FunctionKind::Benchmark(BenchmarkName::Hartmann6) => 6,
            _ => 2,
        }
    }
}

impl std::str::FromStr for FunctionKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "within-model" | "withinmodel" | "gp" => Ok(FunctionKind::WithinModel),
            other => other.parse().map(FunctionKind::Benchmark),
        }
    }
}

impl TryFrom<String> for FunctionKind {
    type Error = HarnessError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FunctionKind> for String {
    fn from(f: FunctionKind) -> String {
        f.as_str().into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(t) => vec![t.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Hyperparameter treatment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HyperMode {
    /// Sample the hyperparameter posterior every iteration.
    #[default]
    Bayes,
    /// Use `hypers` (or the generating values of within-model objectives).
    #[serde(alias = "fixed-psi", alias = "known")]
    Fixed,
}

/// Fixed hyperparameter values; a single lengthscale is shared by all
/// dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperValues {
    pub amplitude: f64,
    pub lengthscales: OneOrMany<f64>,
    pub noise_variance: f64,
}

impl HyperValues {
    pub fn resolve(&self, dim: usize) -> Result<Hyperparams> {
        let ls = match &self.lengthscales {
            OneOrMany::One(l) => vec![*l; dim],
            OneOrMany::Many(v) if v.len() == dim => v.clone(),
            OneOrMany::Many(v) => {
                return Err(HarnessError::Config(format!("{} lengthscales given for dimension {dim}", v.len())))
            }
        };
        Ok(Hyperparams::new(self.amplitude, ls, self.noise_variance)?)
    }
}

/// Replacements for the broad `Gamma(1, 0.1)` priors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorOverrides {
    pub amplitude: Option<Gamma>,
    pub lengthscale: Option<Gamma>,
    pub noise_variance: Option<Gamma>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleOverrides {
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerOverrides {
    pub lhs_per_dim: Option<usize>,
    pub local_starts: Option<usize>,
    pub max_evaluations: Option<usize>,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_samples() -> usize {
    10
}
fn default_features() -> usize {
    500
}
fn default_init() -> usize {
    3
}
fn default_bootstrap() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub methods: Vec<Method>,
    #[serde(alias = "function")]
    pub functions: OneOrMany<FunctionKind>,
    pub restarts: usize,
    pub budget: usize,
    /// Slots `M`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Random features `m`.
    #[serde(default = "default_features")]
    pub features: usize,
    #[serde(default = "default_init")]
    pub init_count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: HyperMode,
    pub hypers: Option<HyperValues>,
    #[serde(default)]
    pub hyperprior: PriorOverrides,
    #[serde(default)]
    pub schedule: ScheduleOverrides,
    #[serde(default)]
    pub optimizer: OptimizerOverrides,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(HarnessError::Config(m.into()));
        if self.methods.is_empty() {
            return fail("`methods` is empty");
        }
        if self.functions.to_vec().is_empty() {
            return fail("`functions` is empty");
        }
        if self.restarts == 0 || self.samples == 0 || self.init_count == 0 || self.features == 0 {
            return fail("`restarts`, `samples`, `features` and `init_count` must be positive");
        }
        for f in self.functions.to_vec() {
            if self.mode == HyperMode::Fixed && self.hypers.is_none() && f != FunctionKind::WithinModel {
                return fail("fixed mode needs `hypers` for benchmark functions");
            }
            if let Some(h) = &self.hypers {
                h.resolve(f.dim())?;
            }
        }
        Ok(())
    }

    /// Hyperparameters generating within-model objectives.
    pub fn generating_hypers(&self) -> Result<Hyperparams> {
        match &self.hypers {
            Some(h) => h.resolve(2),
            None => Ok(within_model::default_hyperparams()),
        }
    }

    pub fn prior(&self, dim: usize) -> HyperPrior {
        let mut p = HyperPrior::broad(dim);
        if let Some(g) = self.hyperprior.amplitude {
            p.amplitude = g;
        }
        if let Some(g) = self.hyperprior.lengthscale {
            p.lengthscales = vec![g; dim];
        }
        if let Some(g) = self.hyperprior.noise_variance {
            p.noise_variance = g;
        }
        p
    }

    pub fn slice_schedule(&self) -> SliceSchedule {
        let mut s = SliceSchedule::default();
        if let Some(b) = self.schedule.burn_in {
            s.burn_in = b;
        }
        if let Some(t) = self.schedule.thin {
            s.thin = t;
        }
        s
    }

    pub fn acq_optimizer(&self) -> AcqOptimizer {
        let mut o = AcqOptimizer::default();
        if let Some(v) = self.optimizer.lhs_per_dim {
            o.lhs_per_dim = v;
        }
        if let Some(v) = self.optimizer.local_starts {
            o.local_starts = v;
        }
        if let Some(v) = self.optimizer.max_evaluations {
            o.max_evaluations = v;
        }
        o
    }

    /// Loop settings for one method on one function.
    pub fn bo_config(&self, method: Method, function: FunctionKind) -> Result<BoConfig> {
        let dim = function.dim();
        let hypers = match self.mode {
            HyperMode::Fixed => HyperModel::Known(match (&self.hypers, function) {
                (Some(h), _) => h.resolve(dim)?,
                (None, FunctionKind::WithinModel) => within_model::default_hyperparams(),
                (None, _) => return Err(HarnessError::Config("fixed mode needs `hypers`".into())),
            }),
            HyperMode::Bayes => HyperModel::Marginalize { prior: self.prior(dim), schedule: self.slice_schedule() },
        };
        let mut cfg = BoConfig::new(method, self.budget, hypers);
        cfg.init_count = self.init_count;
        cfg.samples = self.samples;
        cfg.pes = PesConfig { features: self.features, ..PesConfig::default() };
        cfg.optimizer = self.acq_optimizer();
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_full() {
        let c = ExperimentConfig::from_toml("methods = [\"pes\", \"ei\"]\nfunction = \"branin\"\nrestarts = 2\nbudget = 5\n").unwrap();
        assert_eq!(c.functions.to_vec(), vec![FunctionKind::Benchmark(BenchmarkName::Branin)]);
        assert_eq!(c.mode, HyperMode::Bayes);
        let full = r#"
            name = "wm"
            methods = ["pes-nb"]
            functions = ["within-model", "cosines"]
            restarts = 3
            budget = 4
            samples = 7
            features = 300
            seed = 9
            mode = "fixed"
            [hypers]
            amplitude = 1.0
            lengthscales = 0.3
            noise_variance = 1e-3
            [hyperprior]
            lengthscale = { shape = 2.0, rate = 4.0 }
            [schedule]
            burn_in = 10
        "#;
        let c = ExperimentConfig::from_toml(full).unwrap();
        assert_eq!(c.prior(2).lengthscales[1], Gamma { shape: 2.0, rate: 4.0 });
        assert_eq!(c.slice_schedule().burn_in, 10);
        let bo = c.bo_config(Method::PesNb, FunctionKind::Benchmark(BenchmarkName::Cosines)).unwrap();
        assert_eq!(bo.samples, 7);
        assert!(matches!(bo.hypers, HyperModel::Known(_)));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml("methods = []\nfunction = \"branin\"\nrestarts = 2\nbudget = 5\n").is_err());
        assert!(ExperimentConfig::from_toml("methods = [\"ucb\"]\nfunction = \"branin\"\nrestarts = 2\nbudget = 5\n").is_err());
        assert!(ExperimentConfig::from_toml("methods = [\"ei\"]\nfunction = \"rosen\"\nrestarts = 2\nbudget = 5\n").is_err());
        assert!(ExperimentConfig::from_toml("methods = [\"ei\"]\nfunction = \"branin\"\nrestarts = 2\nbudget = 5\nmode = \"fixed\"\n").is_err());
        assert!(ExperimentConfig::from_toml("methods = [\"ei\"]\nfunction = \"branin\"\nrestarts = 2\nbudget = 5\ntypo = 1\n").is_err());
    }
}

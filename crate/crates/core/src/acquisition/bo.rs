//! The sequential optimization loop.

use serde::{Deserialize, Serialize};

use super::{draw_slot_hypers, ei_precompute, pes_precompute, AcqOptimizer, PesConfig, PsiMode};
use crate::design::latin_hypercube;
use crate::error::{Error, Result};
use crate::gp::{Dataset, Domain, Hyperparams};
use crate::hyper::{HyperPrior, SliceSchedule};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "pes")]
    Pes,
    /// PES with the posterior-mean hyperparameters in every slot.
    #[serde(rename = "pes-nb")]
    PesNb,
    #[serde(rename = "ei")]
    Ei,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Pes => "pes",
            Method::PesNb => "pes-nb",
            Method::Ei => "ei",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pes" => Ok(Method::Pes),
            "pes-nb" | "pesnb" => Ok(Method::PesNb),
            "ei" => Ok(Method::Ei),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// Hyperparameter treatment inside the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HyperModel {
    /// Every slot uses these values.
    Known(Hyperparams),
    /// Re-sampled from the posterior at every iteration.
    Marginalize { prior: HyperPrior, schedule: SliceSchedule },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    pub method: Method,
    /// Queries after the initial design.
    pub budget: usize,
    pub init_count: usize,
    /// Slots `M`.
    pub samples: usize,
    pub pes: PesConfig,
    pub hypers: HyperModel,
    pub optimizer: AcqOptimizer,
}

impl BoConfig {
    pub fn new(method: Method, budget: usize, hypers: HyperModel) -> Self {
        Self { method, budget, init_count: 3, samples: 200, pes: PesConfig::default(), hypers, optimizer: AcqOptimizer::default() }
    }
}

/// Data and recommendations of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoRunState {
    pub method: Method,
    pub seed: u64,
    pub data: Dataset,
    /// `recommendations[t]` is made after `t` loop queries, so entry 0
    /// follows the initial design.
    pub recommendations: Vec<Vec<f64>>,
    /// EP slots that hit the sweep limit, summed over iterations.
    pub unconverged_slots: usize,
}

/// A run stopped by a failing objective; `state` holds everything gathered
/// before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct BoAbort {
    pub state: BoRunState,
    pub error: Error,
}

impl std::fmt::Display for BoAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted after {} observations: {}", self.state.data.len(), self.error)
    }
}

impl std::error::Error for BoAbort {}

fn slot_hypers(data: &Dataset, config: &BoConfig, seed: SeedStream) -> Result<Vec<Hyperparams>> {
    let count = match config.method {
        Method::Ei if matches!(config.hypers, HyperModel::Known(_)) => 1,
        _ => config.samples,
    };
    match &config.hypers {
        HyperModel::Known(hp) => Ok(vec![hp.clone(); count]),
        HyperModel::Marginalize { prior, schedule } => {
            let mode = if config.method == Method::PesNb { PsiMode::Fixed } else { PsiMode::Bayes };
            draw_slot_hypers(data, prior, schedule, count, mode, &mut seed.rng())
        }
    }
}

/// Latin hypercube initial design, then per iteration: draw slot
/// hyperparameters, record the recommendation, build the acquisition,
/// maximize it and query the objective.
pub fn bo_loop<F>(mut objective: F, domain: &Domain, config: &BoConfig, seed: SeedStream) -> std::result::Result<BoRunState, BoAbort>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut state = BoRunState {
        method: config.method,
        seed: seed.seed(),
        data: Dataset::new(domain.clone()),
        recommendations: Vec::with_capacity(config.budget + 1),
        unconverged_slots: 0,
    };
    macro_rules! bail {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => return Err(BoAbort { state, error }),
            }
        };
    }
    if config.init_count == 0 || config.samples == 0 {
        let error = Error::InvalidArgument("init_count and samples must be at least 1".into());
        return Err(BoAbort { state, error });
    }
    for x in latin_hypercube(domain, config.init_count, &mut seed.named("init").rng()) {
        let y = bail!(objective(&x));
        bail!(state.data.push(x, y));
    }

    for t in 0..=config.budget {
        let stream = seed.child(t as u64);
        let hypers = bail!(slot_hypers(&state.data, config, stream.named("hypers")));
        let mut rng = stream.named("optimizer").rng();
        let next = match config.method {
            Method::Pes | Method::PesNb => {
                let ctx = bail!(pes_precompute(&state.data, &hypers, &config.pes, stream.named("maximizers")));
                state.unconverged_slots += ctx.unconverged();
                let rec = bail!(super::recommend(
                    |x| ctx.posterior_mean(x).unwrap_or(f64::NEG_INFINITY),
                    &state.data,
                    &config.optimizer,
                    &mut stream.named("recommend").rng(),
                ));
                state.recommendations.push(rec);
                if t == config.budget {
                    break;
                }
                let anchors: Vec<Vec<f64>> = ctx.maximizers().map(|m| m.location.clone()).collect();
                super::optimize_acquisition(|x| ctx.evaluate(x).unwrap_or(f64::NEG_INFINITY), domain, &anchors, &config.optimizer, &mut rng).0
            }
            Method::Ei => {
                let ctx = bail!(ei_precompute(&state.data, &hypers));
                let rec = bail!(super::recommend(
                    |x| ctx.posterior_mean(x).unwrap_or(f64::NEG_INFINITY),
                    &state.data,
                    &config.optimizer,
                    &mut stream.named("recommend").rng(),
                ));
                state.recommendations.push(rec);
                if t == config.budget {
                    break;
                }
                let anchors = state.data.inputs().to_vec();
                super::optimize_acquisition(|x| ctx.evaluate(x).unwrap_or(f64::NEG_INFINITY), domain, &anchors, &config.optimizer, &mut rng).0
            }
        };
        let y = bail!(objective(&next));
        bail!(state.data.push(next, y));
    }
    Ok(state)
}

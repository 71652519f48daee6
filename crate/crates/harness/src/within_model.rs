//! Objectives drawn from the model's own prior.

use pes::acquisition::{optimize_acquisition, AcqOptimizer};
use pes::gp::{Dataset, Domain, GpPosterior, Hyperparams};
use pes::oracle::{GridSpec, JointSampler};
use pes::rng::SeedStream;

use crate::error::{HarnessError, Result};
use crate::objective::Objective;

/// Locations per dimension of the latent sample grid.
pub const LATENT_GRID: usize = 32;
/// Resolution of the grid used to certify the maximum.
pub const CERTIFY_GRID: usize = 200;

/// Default generating hyperparameters: `γ² = 1`, `ℓᵢ² = 0.1`, `σ² = 1e-6`.
pub fn default_hyperparams() -> Hyperparams {
    Hyperparams::new(1.0, vec![0.1f64.sqrt(); 2], 1e-6).expect("valid constants")
}

/// Posterior mean of a GP fitted to one joint prior draw at 1024 grid
/// locations.
#[derive(Debug, Clone)]
pub struct WithinModelObjective {
    name: String,
    domain: Domain,
    gp: GpPosterior,
    optimum: f64,
    maximizer: Vec<f64>,
}

impl WithinModelObjective {
    /// Latent locations.
    pub fn locations(&self) -> &[Vec<f64>] {
        self.gp.inputs()
    }

    /// Sampled latent values.
    pub fn samples(&self) -> &[f64] {
        self.gp.outputs()
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        self.gp.hyperparams()
    }

    pub fn maximizer(&self) -> &[f64] {
        &self.maximizer
    }
}

/// Draws an objective. The maximum is certified on a 200×200 grid with
/// compass polishing from the 20 best cells.
pub fn gen_within_model_objective(hp: &Hyperparams, seed: SeedStream) -> Result<WithinModelObjective> {
    if hp.dim() != 2 {
        return Err(HarnessError::Config("within-model objectives are two-dimensional".into()));
    }
    let domain = Domain::unit(2);
    let grid = GridSpec::square(domain.clone(), LATENT_GRID)?;
    let prior = GpPosterior::new(&Dataset::new(domain.clone()), hp)?;
    let points = grid.centers();
    let draw = JointSampler::new(&prior, &points)?.sample(1, seed.named("latent"));
    let data = Dataset::from_pairs(domain.clone(), points, draw.column(0).iter().copied().collect())?;
    let gp = GpPosterior::new(&data, hp)?;

    let mean = |x: &[f64]| gp.predict_mean(x).unwrap_or(f64::NEG_INFINITY);
    let certify = GridSpec::square(domain.clone(), CERTIFY_GRID)?;
    let mut cells: Vec<(f64, usize)> = (0..certify.len()).map(|i| (mean(&certify.center(i)), i)).collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let anchors: Vec<Vec<f64>> = cells.iter().take(20).map(|c| certify.center(c.1)).collect();
    let opts = AcqOptimizer {
        lhs_per_dim: 1,
        perturbations_per_anchor: 0,
        local_starts: 22,
        initial_step: 1.0 / CERTIFY_GRID as f64,
        final_step: 1e-9,
        max_evaluations: 2000,
        ..AcqOptimizer::default()
    };
    let (maximizer, optimum) = optimize_acquisition(mean, &domain, &anchors, &opts, &mut seed.named("certify").rng());
    Ok(WithinModelObjective { name: format!("within-model-{}", seed.seed()), domain, gp, optimum, maximizer })
}

impl Objective for WithinModelObjective {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != 2 || !self.domain.contains(x) {
            return Err(HarnessError::OutOfDomain(x.to_vec()));
        }
        Ok(self.gp.predict_mean(x)?)
    }

    fn optimum(&self) -> f64 {
        self.optimum
    }

    fn noise_variance(&self) -> f64 {
        self.gp.hyperparams().noise_variance()
    }
}

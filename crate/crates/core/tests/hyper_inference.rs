use nalgebra::{DMatrix, DVector};
use pes::gp::{Dataset, Domain, Hyperparams};
use pes::hyper::{
    log_hyper_posterior, posterior_mean_hypers, slice_sample_hypers_with, slice_step, Gamma, HyperPrior, SliceSchedule, SliceStep,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mean and batch-means standard error of an autocorrelated series.
fn batch_stats(xs: &[f64]) -> (f64, f64) {
    let batches = 50;
    let size = xs.len() / batches;
    let means: Vec<f64> = xs.chunks(size).take(batches).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

fn prior_draws() -> (HyperPrior, Vec<Hyperparams>) {
    let prior = HyperPrior {
        amplitude: Gamma::new(2.0, 1.5).unwrap(),
        lengthscales: vec![Gamma::new(1.0, 0.1).unwrap()],
        noise_variance: Gamma::new(3.0, 20.0).unwrap(),
    };
    let data = Dataset::new(Domain::unit(1));
    let schedule = SliceSchedule { burn_in: 50, thin: 5, ..Default::default() };
    let s = slice_sample_hypers_with(&data, &prior, 10_000, &schedule, &mut ChaCha8Rng::seed_from_u64(40)).unwrap();
    (prior, s.samples)
}

#[test]
fn prior_chain_matches_gamma_moments() {
    let (prior, draws) = prior_draws();
    for (k, g) in prior.coordinates().iter().enumerate() {
        let xs: Vec<f64> = draws.iter().map(|h| h.to_vec()[k]).collect();
        let (m, se) = batch_stats(&xs);
        assert!((m - g.mean()).abs() < 3.0 * se, "coord {k} mean {m} vs {} (se {se})", g.mean());
        let sq: Vec<f64> = xs.iter().map(|x| (x - g.mean()).powi(2)).collect();
        let (v, se_v) = batch_stats(&sq);
        assert!((v - g.variance()).abs() < 3.0 * se_v, "coord {k} var {v} vs {} (se {se_v})", g.variance());
    }
}

#[test]
fn posterior_mean_of_prior_draws() {
    let (prior, draws) = prior_draws();
    let samples = pes::hyper::HyperPosteriorSamples { log_posterior: vec![0.0; draws.len()], samples: draws.clone(), mean_evaluations_per_sweep: 0.0 };
    let mean = posterior_mean_hypers(&samples).unwrap().to_vec();
    for (k, g) in prior.coordinates().iter().enumerate() {
        let (_, se) = batch_stats(&draws.iter().map(|h| h.to_vec()[k]).collect::<Vec<_>>());
        assert!((mean[k] - g.mean()).abs() < 3.0 * se);
    }
}

#[test]
fn univariate_slice_sampler_matches_grid_cdf() {
    // two-component Gaussian mixture
    let ln_f = |x: f64| {
        let a = 0.3 * (-0.5 * ((x + 1.5) / 0.5).powi(2)).exp() / 0.5;
        let b = 0.7 * (-0.5 * ((x - 1.0) / 0.8).powi(2)).exp() / 0.8;
        (a + b).ln()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (mut x, mut lx) = (0.0, ln_f(0.0));
    let mut draws = Vec::new();
    for i in 0..50_000 + 100 {
        let (nx, nl, _) = slice_step(ln_f, x, lx, SliceStep::default(), &mut rng);
        x = nx;
        lx = nl;
        if i >= 100 && i % 5 == 0 {
            draws.push(x);
        }
    }
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // grid CDF by the trapezoid rule
    let (lo, hi, n) = (-6.0, 6.0, 24_001);
    let h = (hi - lo) / (n - 1) as f64;
    let dens: Vec<f64> = (0..n).map(|i| ln_f(lo + i as f64 * h).exp()).collect();
    let mut cdf = vec![0.0; n];
    for i in 1..n {
        cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i] + dens[i - 1]);
    }
    let total = cdf[n - 1];
    let grid_cdf = |x: f64| {
        let t = ((x - lo) / h).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        (cdf[i] + (t - i as f64) * (cdf[i + 1] - cdf[i])) / total
    };
    let m = draws.len() as f64;
    let ks = draws
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = grid_cdf(*x);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max);
    assert_eq!(draws.len(), 10_000);
    assert!(ks < 0.02, "KS distance {ks}");
}

/// Log posterior over σ² written out with LU determinants and a hand-coded
/// Gamma density.
fn dense_log_posterior(data: &Dataset, amp: f64, ell: f64, s2: f64, prior: &HyperPrior) -> f64 {
    let n = data.len();
    let x = data.inputs();
    let k = DMatrix::from_fn(n, n, |i, j| amp * (-0.5 * ((x[i][0] - x[j][0]) / ell).powi(2)).exp() + if i == j { s2 } else { 0.0 });
    let y = DVector::from_column_slice(data.outputs());
    let lu = k.clone().lu();
    let alpha = lu.solve(&y).unwrap();
    let ll = -0.5 * y.dot(&alpha) - 0.5 * lu.determinant().ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let gamma = |g: &Gamma, v: f64| (g.shape - 1.0) * v.ln() - g.rate * v + g.shape * g.rate.ln() - libm::lgamma(g.shape);
    ll + gamma(&prior.amplitude, amp) + gamma(&prior.lengthscales[0], ell) + gamma(&prior.noise_variance, s2)
}

#[test]
fn noise_mode_matches_grid_oracle() {
    let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
    let ys = xs.iter().enumerate().map(|(i, x)| (5.0 * x[0]).sin() + if i % 2 == 0 { 0.15 } else { -0.15 }).collect();
    let data = Dataset::from_pairs(Domain::unit(1), xs, ys).unwrap();
    let prior = HyperPrior::broad(1);
    let grid: Vec<f64> = (0..200).map(|i| 10f64.powf(-4.0 + 4.0 * i as f64 / 199.0)).collect();
    let argmax = |f: &dyn Fn(f64) -> f64| {
        grid.iter().enumerate().map(|(i, s)| (i, f(*s))).fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b }).0
    };
    let ours = argmax(&|s2| log_hyper_posterior(&Hyperparams::new(1.0, vec![0.3], s2).unwrap(), &data, &prior).unwrap());
    let oracle = argmax(&|s2| dense_log_posterior(&data, 1.0, 0.3, s2, &prior));
    assert_eq!(ours, oracle);
}

#[test]
fn split_chain_log_posterior_agrees() {
    let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64 * 0.37) % 1.0, (i as f64 * 0.61) % 1.0]).collect();
    let ys = xs.iter().map(|x| (3.0 * x[0]).sin() * (2.0 * x[1]).cos()).collect();
    let data = Dataset::from_pairs(Domain::unit(2), xs, ys).unwrap();
    let schedule = SliceSchedule { burn_in: 100, thin: 2, ..Default::default() };
    let s = slice_sample_hypers_with(&data, &HyperPrior::broad(2), 4000, &schedule, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    let (a, b) = s.log_posterior.split_at(2000);
    let ((ma, sa), (mb, sb)) = (batch_stats(a), batch_stats(b));
    assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(), "{ma} vs {mb}");
}

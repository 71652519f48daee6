use nalgebra::{DMatrix, DVector};
use pes::gp::{noisy_kernel_matrix, Dataset, Domain, GpPosterior, Hyperparams};
use pes::rng::SeedStream;
use pes::spectral::{sample_basis, sample_maximizers, sample_weights, SamplePath, WeightSampler};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn small_case(rng: &mut ChaCha8Rng) -> (Dataset, Hyperparams) {
    let hp = Hyperparams::new(1.2, vec![0.3, 0.4], 0.1).unwrap();
    let mut data = Dataset::new(Domain::unit(2));
    for _ in 0..5 {
        data.push(vec![rng.random(), rng.random()], rng.random_range(-1.0..1.0)).unwrap();
    }
    (data, hp)
}

/// Moments of `draws` compared with `(mean, cov)` at three standard errors.
fn check_moments(draws: &[Vec<f64>], mean: &DVector<f64>, cov: &DMatrix<f64>) {
    let n = draws.len() as f64;
    let m = mean.len();
    let emp_mean: Vec<f64> = (0..m).map(|k| draws.iter().map(|d| d[k]).sum::<f64>() / n).collect();
    for k in 0..m {
        let se = (cov[(k, k)] / n).sqrt();
        assert!((emp_mean[k] - mean[k]).abs() < 3.0 * se, "mean {k}: {} vs {}", emp_mean[k], mean[k]);
    }
    for j in 0..m {
        for k in j..m {
            let emp = draws.iter().map(|d| (d[j] - emp_mean[j]) * (d[k] - emp_mean[k])).sum::<f64>() / (n - 1.0);
            let se = ((cov[(j, j)] * cov[(k, k)] + cov[(j, k)].powi(2)) / n).sqrt();
            assert!((emp - cov[(j, k)]).abs() < 3.0 * se, "cov ({j},{k}): {emp} vs {}", cov[(j, k)]);
        }
    }
}

#[test]
fn weight_posterior_moments_both_routes() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (data, hp) = small_case(&mut rng);
    let basis = sample_basis(&hp, 8, &mut rng).unwrap();
    // dense oracle via LU inverse
    let phi = basis.feature_matrix(data.inputs()).unwrap();
    let a = phi.transpose() * &phi + DMatrix::identity(8, 8) * hp.noise_variance();
    let a_inv = a.lu().try_inverse().unwrap();
    let mean = &a_inv * phi.transpose() * DVector::from_column_slice(data.outputs());
    let cov = &a_inv * hp.noise_variance();
    for method in [WeightSampler::Dual, WeightSampler::Primal] {
        let draws: Vec<Vec<f64>> =
            (0..100_000).map(|_| sample_weights(&basis, &data, &hp, method, &mut rng).unwrap()).collect();
        check_moments(&draws, &mean, &cov);
    }
}

/// Argmax frequencies over an 11-point grid: random-feature paths against
/// exact joint sampling of the GP posterior on the grid.
#[test]
fn discrete_argmax_matches_exact_posterior() {
    let hp = Hyperparams::new(1.0, vec![0.25], 0.01).unwrap();
    let data = Dataset::from_pairs(Domain::unit(1), vec![vec![0.3], vec![0.75]], vec![0.8, 0.2]).unwrap();
    let grid: Vec<Vec<f64>> = (0..11).map(|i| vec![i as f64 / 10.0]).collect();
    let draws = 100_000;

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut rff = [0usize; 11];
    for _ in 0..draws {
        let basis = sample_basis(&hp, 1000, &mut rng).unwrap();
        let w = sample_weights(&basis, &data, &hp, WeightSampler::Auto, &mut rng).unwrap();
        let path = SamplePath::new(basis, w).unwrap();
        rff[argmax(grid.iter().map(|x| path.value(x)))] += 1;
    }

    // exact posterior over the grid cells
    let gp = GpPosterior::new(&data, &hp).unwrap();
    let k_grid = noisy_kernel_matrix(&grid, &hp) - DMatrix::identity(11, 11) * hp.noise_variance();
    let k_cross = DMatrix::from_fn(11, 2, |i, j| pes::gp::kernel_se(&grid[i], &data.inputs()[j], &hp).unwrap());
    let k_data = gp.noisy_kernel_matrix();
    let solve = k_data.clone().lu().solve(&k_cross.transpose()).unwrap();
    let cov = &k_grid - &k_cross * &solve + DMatrix::identity(11, 11) * 1e-10;
    let mean: Vec<f64> = grid.iter().map(|x| gp.predict(x).unwrap().0).collect();
    let l = cov.cholesky().unwrap().l();
    let mut exact = [0usize; 11];
    for _ in 0..draws {
        let z = DVector::from_fn(11, |_, _| StandardNormal.sample(&mut rng));
        let f = &l * z;
        exact[argmax((0..11).map(|i| mean[i] + f[i]))] += 1;
    }
    for i in 0..11 {
        let (p, q) = (rff[i] as f64 / draws as f64, exact[i] as f64 / draws as f64);
        let se = ((p * (1.0 - p) + q * (1.0 - q)) / draws as f64).sqrt();
        assert!((p - q).abs() <= 3.0 * se + 1e-12, "cell {i}: {p} vs {q} (se {se})");
    }
}

fn argmax(vals: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in vals.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[test]
fn prior_maximizers_centered() {
    let hp = Hyperparams::isotropic(1.0, 0.3, 2, 1e-3).unwrap();
    let data = Dataset::new(Domain::unit(2));
    let samples = sample_maximizers(&data, &hp, 10_000, 200, SeedStream::new(22)).unwrap();
    for j in 0..2 {
        let mean = samples.iter().map(|s| s.location[j]).sum::<f64>() / samples.len() as f64;
        assert!((mean - 0.5).abs() < 0.02, "dim {j}: {mean}");
    }
    assert!(samples.iter().all(|s| data.domain().contains(&s.location)));
}

#[test]
fn sharp_observation_attracts_maximizers() {
    let ell = 0.05;
    let hp = Hyperparams::new(1.0, vec![ell], 1e-4).unwrap();
    let data = Dataset::from_pairs(Domain::unit(1), vec![vec![0.37]], vec![4.0]).unwrap();
    let samples = sample_maximizers(&data, &hp, 200, 1000, SeedStream::new(23)).unwrap();
    let near = samples.iter().filter(|s| (s.location[0] - 0.37).abs() <= 2.0 * ell).count();
    assert!(near as f64 >= 0.6 * samples.len() as f64, "{near} of {}", samples.len());
}

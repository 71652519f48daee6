//! Joint covariances of function values and partial derivatives under the
//! squared-exponential kernel.
//!
//! With `r = x - x'` the kernel factorizes as `γ² Πᵢ hᵢ(rᵢ)` where
//! `hᵢ(r) = exp(-r²/2ℓᵢ²)`, so any mixed partial derivative is a product of
//! one-dimensional derivatives
//!
//! ```text
//! h⁽ᵏ⁾(r) = (-1/ℓ)ᵏ Heₖ(r/ℓ) h(r)
//! ```
//!
//! with `Heₖ` the probabilists' Hermite polynomials. Differentiating the
//! second argument flips the sign once per derivative. Hessian-Hessian
//! blocks need orders up to four.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::gp::Hyperparams;
use crate::linalg::asymmetry;

/// Which derivative of the latent function an observation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Value,
    First(usize),
    /// `∂²f/∂xᵢ∂xⱼ`; `(i, i)` is a diagonal Hessian entry.
    Second(usize, usize),
}

impl Derivative {
    fn order(&self) -> usize {
        match self {
            Derivative::Value => 0,
            Derivative::First(_) => 1,
            Derivative::Second(..) => 2,
        }
    }

    fn add_to(&self, counts: &mut [u8]) {
        match *self {
            Derivative::Value => {}
            Derivative::First(i) => counts[i] += 1,
            Derivative::Second(i, j) => {
                counts[i] += 1;
                counts[j] += 1;
            }
        }
    }
}

/// A linear functional of the latent function at a point; `noisy` marks
/// observations that carry the likelihood noise `σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub point: Vec<f64>,
    pub derivative: Derivative,
    pub noisy: bool,
}

impl Observable {
    pub fn value(point: &[f64]) -> Self {
        Self { point: point.to_vec(), derivative: Derivative::Value, noisy: false }
    }

    pub fn noisy_value(point: &[f64]) -> Self {
        Self { point: point.to_vec(), derivative: Derivative::Value, noisy: true }
    }

    pub fn first(point: &[f64], i: usize) -> Self {
        Self { point: point.to_vec(), derivative: Derivative::First(i), noisy: false }
    }

    pub fn second(point: &[f64], i: usize, j: usize) -> Self {
        Self { point: point.to_vec(), derivative: Derivative::Second(i, j), noisy: false }
    }
}

#[inline]
fn hermite(k: u8, u: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => u,
        2 => u * u - 1.0,
        3 => u * (u * u - 3.0),
        4 => {
            let u2 = u * u;
            u2 * u2 - 6.0 * u2 + 3.0
        }
        _ => unreachable!("derivative order above four"),
    }
}

/// Prior covariance between two observables (noise excluded).
pub fn covariance(a: &Observable, b: &Observable, hp: &Hyperparams) -> f64 {
    let d = hp.dim();
    let mut counts = [0u8; 64];
    let counts = &mut counts[..d.max(1)];
    a.derivative.add_to(counts);
    b.derivative.add_to(counts);
    let ls = hp.lengthscales();
    let mut q = 0.0;
    let mut poly = 1.0;
    for i in 0..d {
        let u = (a.point[i] - b.point[i]) / ls[i];
        q += u * u;
        let k = counts[i];
        if k > 0 {
            // (-1/ℓ)ᵏ Heₖ(u)
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            poly *= sign * hermite(k, u) / ls[i].powi(k as i32);
        }
    }
    let flip = if b.derivative.order() % 2 == 1 { -1.0 } else { 1.0 };
    flip * hp.amplitude() * poly * (-0.5 * q).exp()
}

/// Covariance between `f(x)` and an observable.
#[inline]
pub fn covariance_with_value(x: &[f64], b: &Observable, hp: &Hyperparams) -> f64 {
    let ls = hp.lengthscales();
    let mut q = 0.0;
    for i in 0..x.len() {
        let u = (x[i] - b.point[i]) / ls[i];
        q += u * u;
    }
    let k = hp.amplitude() * (-0.5 * q).exp();
    // The value sits in the first argument, so derivatives act on the second:
    // ∂/∂x'ᵢ k = (rᵢ/ℓᵢ²) k and ∂²/∂x'ᵢ∂x'ⱼ k = (rᵢrⱼ/ℓᵢ²ℓⱼ² - δᵢⱼ/ℓᵢ²) k.
    match b.derivative {
        Derivative::Value => k,
        Derivative::First(i) => k * (x[i] - b.point[i]) / (ls[i] * ls[i]),
        Derivative::Second(i, j) => {
            let ri = (x[i] - b.point[i]) / (ls[i] * ls[i]);
            let rj = (x[j] - b.point[j]) / (ls[j] * ls[j]);
            let delta = if i == j { 1.0 / (ls[i] * ls[i]) } else { 0.0 };
            k * (ri * rj - delta)
        }
    }
}

/// Dense covariance over `obs`, adding `σ²` on the diagonal of noisy entries.
pub fn covariance_matrix(obs: &[Observable], hp: &Hyperparams) -> Result<DMatrix<f64>> {
    for o in obs {
        check_dim(hp.dim(), o.point.len())?;
    }
    let n = obs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = covariance(&obs[i], &obs[j], hp);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        if obs[i].noisy {
            k[(i, i)] += hp.noise_variance();
        }
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("derivative covariance"));
    }
    Ok(k)
}

/// Cross-covariance block between two observable lists (no noise).
pub fn cross_covariance(rows: &[Observable], cols: &[Observable], hp: &Hyperparams) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| covariance(&rows[i], &cols[j], hp))
}

/// Index pairs `(i, j)`, `i < j`, of the strict upper triangle in row-major
/// order.
pub fn upper_pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |i| (i + 1..d).map(move |j| (i, j)))
}

/// Which derivative blocks at an anchor point to stack with the data.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBlockSpec {
    pub anchor: Vec<f64>,
    pub gradient: bool,
    pub hessian_diag: bool,
    pub hessian_upper: bool,
}

impl DerivativeBlockSpec {
    /// All blocks: the layout used to condition on a maximizer.
    pub fn full(anchor: &[f64]) -> Self {
        Self { anchor: anchor.to_vec(), gradient: true, hessian_diag: true, hessian_upper: true }
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    /// `[f(x⋆); diag ∇²f(x⋆)]`
    pub fn latent_block(&self) -> Vec<Observable> {
        let d = self.dim();
        let mut v = vec![Observable::value(&self.anchor)];
        if self.hessian_diag {
            v.extend((0..d).map(|i| Observable::second(&self.anchor, i, i)));
        }
        v
    }

    /// `[y₁..y_n; ∇f(x⋆); upper ∇²f(x⋆)]`
    pub fn conditioning_block(&self, data_inputs: &[Vec<f64>]) -> Vec<Observable> {
        let d = self.dim();
        let mut v: Vec<Observable> = data_inputs.iter().map(|x| Observable::noisy_value(x)).collect();
        if self.gradient {
            v.extend((0..d).map(|i| Observable::first(&self.anchor, i)));
        }
        if self.hessian_upper {
            v.extend(upper_pairs(d).map(|(i, j)| Observable::second(&self.anchor, i, j)));
        }
        v
    }

    /// Full stacked layout `[latent; conditioning]`.
    pub fn observables(&self, data_inputs: &[Vec<f64>]) -> Vec<Observable> {
        let mut v = self.latent_block();
        v.extend(self.conditioning_block(data_inputs));
        v
    }
}

/// Joint covariance over
/// `[f(x⋆); diag ∇²f(x⋆); y₁..y_n; ∇f(x⋆); upper ∇²f(x⋆)]`
/// (blocks present according to `spec`), with `σ²` on the `y` diagonal.
pub fn cov_with_derivatives(spec: &DerivativeBlockSpec, data_inputs: &[Vec<f64>], hp: &Hyperparams) -> Result<DMatrix<f64>> {
    check_dim(hp.dim(), spec.dim())?;
    let k = covariance_matrix(&spec.observables(data_inputs), hp)?;
    let asym = asymmetry(&k);
    if asym > 1e-10 {
        return Err(Error::Asymmetric(asym));
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{kernel_se, noisy_kernel_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const STEP: f64 = 1e-5;

    /// Drops one index from a derivative, returning the reduced derivative
    /// and the dimension that was removed.
    fn lower(d: Derivative) -> Option<(Derivative, usize)> {
        match d {
            Derivative::Value => None,
            Derivative::First(i) => Some((Derivative::Value, i)),
            Derivative::Second(i, j) => Some((Derivative::First(i), j)),
        }
    }

    /// Central difference (step 1e-5) of the block one order lower, in
    /// whichever argument still carries a derivative. Since every lower block
    /// is checked the same way, the chain bottoms out at `kernel_se`.
    fn fd_cov(a: &Observable, b: &Observable, hp: &Hyperparams) -> f64 {
        let shifted = |o: &Observable, d: Derivative, i: usize, h: f64| {
            let mut p = o.point.clone();
            p[i] += h;
            Observable { point: p, derivative: d, noisy: false }
        };
        if let Some((da, i)) = lower(a.derivative) {
            let plus = covariance(&shifted(a, da, i, STEP), b, hp);
            let minus = covariance(&shifted(a, da, i, -STEP), b, hp);
            (plus - minus) / (2.0 * STEP)
        } else if let Some((db, i)) = lower(b.derivative) {
            let plus = covariance(a, &shifted(b, db, i, STEP), hp);
            let minus = covariance(a, &shifted(b, db, i, -STEP), hp);
            (plus - minus) / (2.0 * STEP)
        } else {
            kernel_se(&a.point, &b.point, hp).unwrap()
        }
    }

    fn all_derivatives(d: usize) -> Vec<Derivative> {
        let mut v = vec![Derivative::Value];
        v.extend((0..d).map(Derivative::First));
        for i in 0..d {
            for j in i..d {
                v.push(Derivative::Second(i, j));
            }
        }
        v
    }

    fn rel_close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()) + abs
    }

    #[test]
    fn value_value_is_kernel() {
        let hp = Hyperparams::new(1.3, vec![0.3, 0.8], 1e-3).unwrap();
        let (x, y) = ([0.1, 0.4], [0.7, 0.2]);
        let c = covariance(&Observable::value(&x), &Observable::value(&y), &hp);
        assert!((c - kernel_se(&x, &y, &hp).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn value_gradient_at_same_point_vanishes() {
        let hp = Hyperparams::new(1.3, vec![0.3, 0.8], 1e-3).unwrap();
        let x = [0.42, 0.17];
        for i in 0..2 {
            assert_eq!(covariance(&Observable::value(&x), &Observable::first(&x, i), &hp), 0.0);
            assert_eq!(covariance(&Observable::first(&x, i), &Observable::value(&x), &hp), 0.0);
        }
    }

    #[test]
    fn derivative_blocks_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let hp = Hyperparams::new(1.7, vec![0.35, 0.6], 1e-3).unwrap();
        let derivs = all_derivatives(2);
        for _ in 0..50 {
            let x: Vec<f64> = (0..2).map(|_| rng.random()).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.random()).collect();
            for da in &derivs {
                for db in &derivs {
                    let a = Observable { point: x.clone(), derivative: *da, noisy: false };
                    let b = Observable { point: y.clone(), derivative: *db, noisy: false };
                    let exact = covariance(&a, &b, &hp);
                    let fd = fd_cov(&a, &b, &hp);
                    assert!(rel_close(exact, fd, 1e-4, 1e-6), "{da:?} {db:?}: {exact} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn first_order_blocks_against_raw_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let hp = Hyperparams::new(0.9, vec![0.4, 0.25, 0.7], 1e-3).unwrap();
        let k = |a: &[f64], b: &[f64]| kernel_se(a, b, &hp).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            for i in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += STEP;
                xm[i] -= STEP;
                let fd_first = (k(&xp, &y) - k(&xm, &y)) / (2.0 * STEP);
                let exact = covariance(&Observable::first(&x, i), &Observable::value(&y), &hp);
                assert!(rel_close(exact, fd_first, 1e-4, 1e-8));
                let fd_second = (k(&xp, &y) - 2.0 * k(&x, &y) + k(&xm, &y)) / (STEP * STEP);
                let exact2 = covariance(&Observable::second(&x, i, i), &Observable::value(&y), &hp);
                assert!(rel_close(exact2, fd_second, 1e-4, 1e-5));
                // second argument
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[i] += STEP;
                ym[i] -= STEP;
                let fd_b = (k(&x, &yp) - k(&x, &ym)) / (2.0 * STEP);
                let exact_b = covariance(&Observable::value(&x), &Observable::first(&y, i), &hp);
                assert!(rel_close(exact_b, fd_b, 1e-4, 1e-8));
            }
        }
    }

    #[test]
    fn value_fast_path_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let hp = Hyperparams::new(1.1, vec![0.3, 0.45], 1e-3).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..2).map(|_| rng.random()).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.random()).collect();
            for d in all_derivatives(2) {
                let b = Observable { point: y.clone(), derivative: d, noisy: false };
                let slow = covariance(&Observable::value(&x), &b, &hp);
                assert!((slow - covariance_with_value(&x, &b, &hp)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stacked_matrix_symmetric_with_noise_on_y_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let hp = Hyperparams::new(1.0, vec![0.3, 0.3], 0.01).unwrap();
        let inputs: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.random(), rng.random()]).collect();
        let spec = DerivativeBlockSpec::full(&[0.5, 0.5]);
        let k = cov_with_derivatives(&spec, &inputs, &hp).unwrap();
        // 1 + d latent, n + d + d(d-1)/2 conditioning
        assert_eq!(k.nrows(), 3 + 4 + 2 + 1);
        assert_eq!(k, k.transpose());
        let y_block = k.view((3, 3), (4, 4)).into_owned();
        assert_eq!(y_block, noisy_kernel_matrix(&inputs, &hp));
        // derivative diagonal carries no noise
        let grad_var = k[(7, 7)];
        assert_eq!(grad_var, hp.amplitude() / (0.3 * 0.3));
    }

    #[test]
    fn hessian_variance_closed_form() {
        // Var[∂²f/∂x²] = 3γ²/ℓ⁴, Cov[f, ∂²f/∂x²] = -γ²/ℓ²
        let hp = Hyperparams::new(2.0, vec![0.5], 1e-3).unwrap();
        let x = [0.3];
        let h = Observable::second(&x, 0, 0);
        assert!((covariance(&h, &h, &hp) - 3.0 * 2.0 / 0.0625).abs() < 1e-12);
        assert!((covariance(&Observable::value(&x), &h, &hp) + 2.0 / 0.25).abs() < 1e-12);
    }
}

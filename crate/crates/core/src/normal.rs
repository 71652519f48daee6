//! Standard normal density, distribution function and the inverse Mills
//! ratio, with tail-safe evaluation.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument `φ(a)/Φ(a)` is evaluated by continued fraction.
const CF_THRESHOLD: f64 = -5.0;
const CF_TERMS: usize = 120;

/// Standard normal density φ(x).
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard normal distribution function Φ(x).
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Returns `(r, r + a)` where `r = φ(a)/Φ(a)`.
///
/// For very negative `a` both terms come from the continued fraction of the
/// Mills ratio so that `r + a` keeps full relative precision.
pub fn inv_mills_pair(a: f64) -> (f64, f64) {
    let (r, ra, _) = truncation_factors(a);
    (r, ra)
}

/// `(r, r + a, 1 - r(r + a))` with `r = φ(a)/Φ(a)`.
///
/// `1 - r(r + a) = Var[Z | Z > -a]` for standard normal `Z`; it tends to
/// zero as `a → -∞` and is evaluated without cancellation there.
pub fn truncation_factors(a: f64) -> (f64, f64, f64) {
    if a < CF_THRESHOLD {
        let t = -a;
        // r - t = 1 / (t + 2 / (t + 3 / (t + ...)))
        let mut tail = t;
        for k in (3..=CF_TERMS).rev() {
            tail = t + k as f64 / tail;
        }
        let u = 2.0 / tail;
        let delta = 1.0 / (t + u);
        // 1 - (t + δ)δ = δ(u - δ) since tδ = 1 - uδ
        (t + delta, delta, delta * (u - delta))
    } else {
        let r = pdf(a) / cdf(a);
        (r, r + a, 1.0 - r * (r + a))
    }
}

/// Inverse Mills ratio φ(a)/Φ(a).
pub fn inv_mills(a: f64) -> f64 {
    inv_mills_pair(a).0
}

/// Differential entropy of a standard normal, `0.5 log(2πe)`.
pub fn unit_entropy() -> f64 {
    0.5 * (2.0 * PI * std::f64::consts::E).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14, "{}", cdf(1.0));
        assert!((cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-16);
    }

    #[test]
    fn mills_continuous_across_threshold() {
        let below = inv_mills_pair(CF_THRESHOLD - 1e-9);
        let above = inv_mills_pair(CF_THRESHOLD + 1e-9);
        assert!((below.0 - above.0).abs() < 1e-8);
        assert!((below.1 - above.1).abs() < 1e-8);
    }

    #[test]
    fn mills_deep_tail() {
        // r + a ~ -1/a for a -> -inf
        let (r, ra) = inv_mills_pair(-1e4);
        assert!((r - 1e4).abs() < 1e-3);
        assert!((ra * 1e4 - 1.0).abs() < 1e-6);
        assert!(ra > 0.0);
    }

    #[test]
    fn variance_factor_continuous_and_positive() {
        let below = truncation_factors(CF_THRESHOLD - 1e-9).2;
        let above = truncation_factors(CF_THRESHOLD + 1e-9).2;
        assert!((below - above).abs() < 1e-8 * above);
        for a in [-1e3, -50.0, -8.0, -2.0, 0.0, 3.0] {
            let v = truncation_factors(a).2;
            assert!(v > 0.0 && v < 1.0, "{a}: {v}");
        }
        // Var[Z | Z > t] ~ 1/t² for large t
        assert!((truncation_factors(-1e3).2 * 1e6 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn mills_large_positive() {
        let (r, ra) = inv_mills_pair(40.0);
        assert!((0.0..1e-300).contains(&r));
        assert_eq!(ra, 40.0 + r);
    }
}

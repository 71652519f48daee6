//! Space-filling start designs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::gp::Domain;

/// Latin hypercube sample of `count` points in `domain`: each dimension is
/// split into `count` equal strata and every stratum holds exactly one point.
pub fn latin_hypercube<R: Rng + ?Sized>(domain: &Domain, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let mut points = vec![vec![0.0; d]; count];
    let mut strata: Vec<usize> = (0..count).collect();
    for j in 0..d {
        strata.shuffle(rng);
        for (p, s) in points.iter_mut().zip(&strata) {
            let u = (*s as f64 + rng.random::<f64>()) / count as f64;
            p[j] = domain.lower()[j] + u * domain.width(j);
        }
    }
    points
}

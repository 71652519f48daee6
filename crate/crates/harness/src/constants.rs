//! Literature constants of the benchmark functions.
//!
//! Native domains and optima are for the minimization forms. The harness
//! rescales inputs to the unit box and negates Branin and Hartmann-6 so that
//! every benchmark is maximized.

use std::f64::consts::PI;

pub const BRANIN_LOWER: [f64; 2] = [-5.0, 0.0];
pub const BRANIN_UPPER: [f64; 2] = [10.0, 15.0];
pub const BRANIN_A: f64 = 1.0;
pub const BRANIN_B: f64 = 5.1 / (4.0 * PI * PI);
pub const BRANIN_C: f64 = 5.0 / PI;
pub const BRANIN_R: f64 = 6.0;
pub const BRANIN_S: f64 = 10.0;
pub const BRANIN_T: f64 = 1.0 / (8.0 * PI);
/// Global minimum value.
pub const BRANIN_MIN: f64 = 0.397_887_357_729_738;
/// Global minimizers in native coordinates.
pub const BRANIN_ARGMIN: [[f64; 2]; 3] = [[-PI, 12.275], [PI, 2.275], [3.0 * PI, 2.475]];

pub const HARTMANN6_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
pub const HARTMANN6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
pub const HARTMANN6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];
/// Global minimum value (of the negated form maximized here).
pub const HARTMANN6_MIN: f64 = -3.322_368_011_415_51;
pub const HARTMANN6_ARGMIN: [f64; 6] = [0.201_690, 0.150_011, 0.476_874, 0.275_332, 0.311_652, 0.657_300];

/// Cosine mixture `1 - Σᵢ (g(uᵢ) - r(uᵢ))` with `g(u) = (1.6u - 0.5)²` and
/// `r(u) = 0.3 cos(3π(1.6u - 0.5))` on `[0, 1]²`.
pub const COSINES_SCALE: f64 = 1.6;
pub const COSINES_SHIFT: f64 = 0.5;
pub const COSINES_AMPLITUDE: f64 = 0.3;
pub const COSINES_FREQUENCY: f64 = 3.0 * PI;
pub const COSINES_MAX: f64 = 1.6;
pub const COSINES_ARGMAX: [f64; 2] = [0.3125, 0.3125];

/// Observation noise variance added to benchmark evaluations.
pub const BENCHMARK_NOISE_VARIANCE: f64 = 1e-3;

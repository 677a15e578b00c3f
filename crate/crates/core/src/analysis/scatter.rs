use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::prob::{mutual_info_discrimination, tv_discrimination, PredictionJoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub tv: f64,
    pub mi: f64,
}

/// splitmix64 step, used to derive independent per-sample seeds.
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A binary prediction joint drawn uniformly from the 8-cell simplex
/// (normalized i.i.d. exponentials).
pub fn sample_prediction_joint(rng: &mut impl rand::Rng) -> PredictionJoint {
    let raw: Vec<f64> = (0..8).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = raw.iter().sum();
    PredictionJoint::new(2, raw.into_iter().map(|v| v / s).collect()).expect("normalized sample is a distribution")
}

/// `n` uniformly sampled prediction joints mapped to (TV discrimination, `I(A; Ŷ | Y)`).
///
/// Sample `i` uses its own generator seeded from `(seed, i)`, so the output does
/// not depend on how the work is scheduled.
pub fn tv_mi_scatter(n: usize, seed: u64) -> Vec<ScatterPoint> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, i));
            let pred = sample_prediction_joint(&mut rng);
            let tv = tv_discrimination(&pred.cond_pred(), &pred.label_marginal()).expect("binary shapes agree");
            ScatterPoint { tv, mi: mutual_info_discrimination(&pred) }
        })
        .collect()
}

/// A nearly all-majority population whose two groups receive opposite
/// deterministic predictions: `Ŷ = 1` for `A = 0` and `Ŷ = 0` for `A = 1`.
pub fn hand_built_skewed_joint(p_majority: f64) -> PredictionJoint {
    PredictionJoint::from_fn(2, |yh, _y, a| {
        let pa = if a == 0 { p_majority } else { 1.0 - p_majority };
        let hit = (a == 0 && yh == 1) || (a == 1 && yh == 0);
        if hit {
            0.5 * pa
        } else {
            0.0
        }
    })
    .expect("valid by construction")
}

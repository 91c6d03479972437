//! Seeded synthetic training sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::{FeatureVector, LabeledExample};

/// Two well separated clusters in the six-dimensional unit cube: label 0
/// around 0.25, label 1 around 0.75, each coordinate jittered by ±0.2.
pub fn two_clusters(n: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = (i % 2) as f64;
            let centre = 0.25 + 0.5 * label;
            let x = (0..6).map(|_| centre + rng.random_range(-0.2..0.2)).collect();
            (x, label)
        })
        .collect()
}

/// Feature vectors shaped like the payment simulator's output, without
/// running it: mostly honest exact payments, plus under-payment, presenting
/// someone else's code and re-presenting a paid code.
pub fn standard_set(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let tier = rng.random_range(1..=5) as f64 / 5.0;
            let age = rng.random_range(0.0..0.05);
            let fail = if rng.random_bool(0.1) { 0.5 } else { 0.0 };
            let mut f = FeatureVector {
                amount_deviation: 0.0,
                code_age_norm: age,
                prior_lookup_count_norm: 0.2,
                tier_ordinal_norm: tier,
                failed_login_rate_norm: fail,
                channel_mismatch: 0.0,
            };
            let label = match rng.random_range(0..100) {
                0..80 => 0,
                80..87 => {
                    f.amount_deviation = rng.random_range(0.2..0.9);
                    1
                }
                87..94 => {
                    f.channel_mismatch = 1.0;
                    f.failed_login_rate_norm = 0.0;
                    1
                }
                _ => {
                    f.prior_lookup_count_norm = 0.6;
                    1
                }
            };
            LabeledExample { features: f, label }
        })
        .collect()
}

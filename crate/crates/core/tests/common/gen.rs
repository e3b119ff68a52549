#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

pub fn random_walk(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(rng);
            acc += e;
            acc
        })
        .collect()
}

/// A mix of noise, AR(1), oscillations and trends with random length.
pub fn assorted(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> Vec<f64> {
    let n = rng.random_range(min_len..=max_len);
    let kind = rng.random_range(0..4);
    let phi: f64 = rng.random_range(-0.9..0.95);
    let period: f64 = rng.random_range(4.0..60.0);
    let mut prev = 0.0;
    (0..n)
        .map(|t| {
            let e: f64 = StandardNormal.sample(rng);
            match kind {
                0 => e,
                1 => {
                    prev = phi * prev + e;
                    prev
                }
                2 => (2.0 * std::f64::consts::PI * t as f64 / period).sin() + 0.3 * e,
                _ => 0.01 * t as f64 + e,
            }
        })
        .collect()
}

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tse_core::signal::compute_features;
use tse_library::{MetadataDraft, NewSeries};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn draft(name: &str, category: &str) -> MetadataDraft {
    MetadataDraft {
        name: Some(name.into()),
        sampling_rate: Some("1 Hz".into()),
        description: Some("test series".into()),
        source: Some("integration test".into()),
        category: Some(category.into()),
        ..Default::default()
    }
}

pub fn opted_in(name: &str) -> MetadataDraft {
    MetadataDraft {
        contact_email: Some("watcher@example.org".into()),
        opt_in_alerts: Some("true".into()),
        ..draft(name, "synthetic/watched")
    }
}

/// AR(1) series with coefficient `phi`.
pub fn ar1(rng: &mut impl Rng, n: usize, phi: f64) -> Vec<f64> {
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            x = phi * x + rng.random::<f64>() - 0.5;
            x
        })
        .collect()
}

pub fn new_series(values: Vec<f64>, metadata: MetadataDraft) -> NewSeries {
    NewSeries {
        features: compute_features(&values).unwrap(),
        metadata: metadata.validate().unwrap(),
        values,
        truncated: false,
    }
}

pub fn txt(values: &[f64]) -> Vec<u8> {
    tse_library::ingest::write_txt(values).into_bytes()
}

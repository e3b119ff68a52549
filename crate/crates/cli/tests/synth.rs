use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tse_cli::synth::*;
use tse_core::signal::{autocorrelation, compute_features, permutation_entropy};

fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

// Both flows are chaotic, so any two integrations separate exponentially; the
// step-halving bound is checked over the first 50 samples (10 time units),
// together with the fourth-order error ratio.
const HORIZON: usize = 50;

fn check_halving(run: impl Fn(f64, usize) -> Vec<f64>) {
    let a = run(FLOW_DT, FLOW_STRIDE);
    let b = run(FLOW_DT / 2.0, FLOW_STRIDE * 2);
    let c = run(FLOW_DT / 4.0, FLOW_STRIDE * 4);
    let e1 = rms(&a, &b);
    let e2 = rms(&b, &c);
    assert!(e1 < 1e-3, "step-halving rms {e1}");
    let ratio = e1 / e2;
    assert!((12.0..20.0).contains(&ratio), "error ratio {ratio}, expected about 16");
}

#[test]
fn sprott_step_halving() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let y0 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        check_halving(|dt, stride| sprott(y0, SPROTT_OMEGA, dt, stride, 0, HORIZON));
    }
}

#[test]
fn pendulum_step_halving() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let p = Pendulum { damping: 0.5, drive: rng.random_range(0.9..1.5), omega: 2.0 / 3.0 };
        let y0 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        check_halving(|dt, stride| p.integrate(y0, dt, stride, 0, HORIZON));
    }
}

#[test]
fn sprott_default_forcing() {
    assert_eq!(SPROTT_OMEGA, 1.88);
    let s = generate(SynthClass::Flow, 0, 1);
    assert_eq!(s.category, "synthetic/flow/sprott");
    assert!(s.description.contains("1.88"));
    // bounded and visibly not periodic noise: strong short-lag memory
    assert!(s.values.iter().all(|v| v.abs() < 10.0));
    assert!(autocorrelation(&s.values, 1).unwrap() > 0.8);
}

#[test]
fn rk4_is_exact_enough_on_harmonic_oscillator() {
    // x'' = -x from (1, 0) is cos t
    let xs = integrate(|_, y| [y[1], -y[0]], [1.0, 0.0], 0.01, 10, 0, 100, 0);
    for (i, x) in xs.iter().enumerate() {
        let t = (i + 1) as f64 * 0.1;
        assert!((x - t.cos()).abs() < 1e-9);
    }
}

// Chaos signature: no linear memory, yet ordinal patterns are far from
// uniform. The threshold needs order 5 (120 patterns, well sampled at 5000
// points); at the feature order 3 the gap to noise is still clear.
#[test]
fn logistic_r4_is_uncorrelated_but_ordinally_structured() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let x = map_orbit(|x| 4.0 * x * (1.0 - x), rng.random_range(0.05..0.95), SERIES_LEN);
        let ac1 = autocorrelation(&x, 1).unwrap();
        assert!(ac1.abs() < 0.05, "ac1 {ac1}");
        let pe5 = permutation_entropy(&x, 5, 1).unwrap();
        assert!(pe5 < 0.7, "pe5 {pe5}");
        let noise: Vec<f64> = (0..SERIES_LEN).map(|_| rng.random::<f64>()).collect();
        let gap = permutation_entropy(&noise, 3, 1).unwrap() - permutation_entropy(&x, 3, 1).unwrap();
        assert!(gap > 0.1, "order-3 gap {gap}");
    }
}

#[test]
fn seed_library_is_reproducible() {
    let a = seed_library(6, 11);
    let b = seed_library(6, 11);
    assert_eq!(a.len(), 30);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.values, y.values);
        let fx = compute_features(&x.values).unwrap();
        let fy = compute_features(&y.values).unwrap();
        assert_eq!(fx, fy);
    }
}

#[test]
fn every_subtype_yields_features() {
    for s in seed_library(12, 2) {
        compute_features(&s.values).unwrap_or_else(|e| panic!("{}: {e}", s.category));
    }
}

//! Seeded generators for the synthetic seed library.
//!
//! Every series is a pure function of `(class, index, seed)`. Subtypes are
//! assigned round-robin within a class and their parameters and initial
//! conditions are drawn from a ChaCha stream keyed by the triple.
//!
//! ODE classes use fixed-step RK4 with [`FLOW_DT`], keep every
//! [`FLOW_STRIDE`]-th state and discard the first [`FLOW_TRANSIENT`] steps.
//! Stochastic classes use Euler-Maruyama with [`SDE_DT`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, StandardNormal};

/// Samples per generated series.
pub const SERIES_LEN: usize = 5000;
/// Forcing frequency of the driven cubic oscillator.
pub const SPROTT_OMEGA: f64 = 1.88;
pub const FLOW_DT: f64 = 0.05;
pub const FLOW_STRIDE: usize = 4;
pub const FLOW_TRANSIENT: usize = 1000;
pub const SDE_DT: f64 = 0.1;
pub const MAP_BURN_IN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SynthClass {
    Noise,
    Map,
    Flow,
    Stochastic,
    Periodic,
}

impl SynthClass {
    pub const ALL: [SynthClass; 5] =
        [SynthClass::Noise, SynthClass::Map, SynthClass::Flow, SynthClass::Stochastic, SynthClass::Periodic];

    pub fn name(self) -> &'static str {
        match self {
            SynthClass::Noise => "noise",
            SynthClass::Map => "map",
            SynthClass::Flow => "flow",
            SynthClass::Stochastic => "stochastic",
            SynthClass::Periodic => "periodic",
        }
    }

    fn subtypes(self) -> &'static [&'static str] {
        match self {
            SynthClass::Noise => &["gaussian", "uniform", "beta", "binomial"],
            SynthClass::Map => &["logistic", "tent", "sine"],
            SynthClass::Flow => &["sprott", "pendulum"],
            SynthClass::Stochastic => &["ornstein-uhlenbeck", "random-walk"],
            SynthClass::Periodic => &["sine-noise"],
        }
    }

    fn stream(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for SynthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SynthClass::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown class `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSeries {
    pub class: SynthClass,
    pub index: usize,
    pub name: String,
    /// `synthetic/{class}/{subtype}`.
    pub category: String,
    pub description: String,
    pub values: Vec<f64>,
}

/// Generator for one member of `class`.
pub fn generate(class: SynthClass, index: usize, seed: u64) -> SynthSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((class.stream() << 40) | index as u64);
    let subs = class.subtypes();
    let sub = subs[index % subs.len()];
    let n = SERIES_LEN;
    let (values, description) = match (class, sub) {
        (SynthClass::Noise, "gaussian") => (draw(&mut rng, n, StandardNormal), "iid standard normal".to_string()),
        (SynthClass::Noise, "uniform") => {
            ((0..n).map(|_| rng.random::<f64>()).collect(), "iid uniform on [0, 1)".to_string())
        }
        (SynthClass::Noise, "beta") => (draw(&mut rng, n, Beta::new(2.0, 5.0).unwrap()), "iid Beta(2, 5)".to_string()),
        (SynthClass::Noise, _) => {
            let p = rng.random_range(0.2..0.8);
            let dist = Binomial::new(20, p).unwrap();
            ((0..n).map(|_| dist.sample(&mut rng) as f64).collect(), format!("iid Binomial(20, {p:.3})"))
        }
        (SynthClass::Map, "logistic") => {
            let r = rng.random_range(3.6..=4.0);
            (iterate(&mut rng, n, |x| r * x * (1.0 - x)), format!("logistic map, r = {r:.4}"))
        }
        (SynthClass::Map, "tent") => {
            let mu = rng.random_range(1.5..1.99);
            (iterate(&mut rng, n, |x| mu * x.min(1.0 - x)), format!("tent map, mu = {mu:.4}"))
        }
        (SynthClass::Map, _) => {
            let a = rng.random_range(0.87..=1.0);
            (iterate(&mut rng, n, |x| a * (PI * x).sin()), format!("sine map, a = {a:.4}"))
        }
        (SynthClass::Flow, "sprott") => {
            let y0 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            (
                sprott(y0, SPROTT_OMEGA, FLOW_DT, FLOW_STRIDE, FLOW_TRANSIENT, n),
                format!("x'' = -x^3 + sin({SPROTT_OMEGA} t)"),
            )
        }
        (SynthClass::Flow, _) => {
            let p = Pendulum { damping: 0.5, drive: rng.random_range(0.9..1.5), omega: 2.0 / 3.0 };
            let y0 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let desc = format!("damped driven pendulum, angular velocity, drive = {:.4}", p.drive);
            (p.integrate(y0, FLOW_DT, FLOW_STRIDE, FLOW_TRANSIENT, n), desc)
        }
        (SynthClass::Stochastic, "ornstein-uhlenbeck") => {
            let theta = rng.random_range(0.05..1.0);
            let mut x = 0.0;
            let values = (0..n)
                .map(|_| {
                    x += -theta * x * SDE_DT + SDE_DT.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    x
                })
                .collect();
            (values, format!("Ornstein-Uhlenbeck, theta = {theta:.4}"))
        }
        (SynthClass::Stochastic, _) => {
            let mut x = 0.0;
            let values = (0..n)
                .map(|_| {
                    x += SDE_DT.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    x
                })
                .collect();
            (values, "Gaussian random walk".to_string())
        }
        (SynthClass::Periodic, _) => {
            const SNRS: [f64; 4] = [1.0, 3.0, 10.0, 30.0];
            let snr = SNRS[(index / subs.len()) % SNRS.len()];
            let period = rng.random_range(20.0..200.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            // signal power of a unit sine is 1/2
            let sigma = (0.5 / snr).sqrt();
            let values = (0..n)
                .map(|t| (2.0 * PI * t as f64 / period + phase).sin() + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            (values, format!("sine, period {period:.2} samples, SNR {snr}"))
        }
    };
    SynthSeries {
        class,
        index,
        name: format!("{sub}-{index:04}"),
        category: format!("synthetic/{class}/{sub}"),
        description,
        values,
    }
}

/// `n_per_class` members of every class, class-major.
pub fn seed_library(n_per_class: usize, seed: u64) -> Vec<SynthSeries> {
    SynthClass::ALL.into_iter().flat_map(|c| (0..n_per_class).map(move |i| generate(c, i, seed))).collect()
}

fn draw<D: Distribution<f64>>(rng: &mut ChaCha8Rng, n: usize, dist: D) -> Vec<f64> {
    dist.sample_iter(rng).take(n).collect()
}

/// Map orbit from a uniform start in (0.05, 0.95).
fn iterate(rng: &mut ChaCha8Rng, n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    map_orbit(f, rng.random_range(0.05..0.95), n)
}

/// `n` iterates of `f` from `x0` after discarding [`MAP_BURN_IN`].
pub fn map_orbit(f: impl Fn(f64) -> f64, x0: f64, n: usize) -> Vec<f64> {
    let mut x = x0;
    for _ in 0..MAP_BURN_IN {
        x = f(x);
    }
    (0..n)
        .map(|_| {
            x = f(x);
            x
        })
        .collect()
}

pub fn rk4_step(f: impl Fn(f64, [f64; 2]) -> [f64; 2], t: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    let k1 = f(t, y);
    let k2 = f(t + h / 2.0, add(y, k1, h / 2.0));
    let k3 = f(t + h / 2.0, add(y, k2, h / 2.0));
    let k4 = f(t + h, add(y, k3, h));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Integrate, skip `transient` steps, then record component `which` every
/// `stride` steps until `n` samples are collected.
pub fn integrate(
    f: impl Fn(f64, [f64; 2]) -> [f64; 2],
    y0: [f64; 2],
    dt: f64,
    stride: usize,
    transient: usize,
    n: usize,
    which: usize,
) -> Vec<f64> {
    let mut y = y0;
    let mut step = 0usize;
    let mut advance = |y: &mut [f64; 2]| {
        *y = rk4_step(&f, step as f64 * dt, *y, dt);
        step += 1;
    };
    for _ in 0..transient {
        advance(&mut y);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..stride {
            advance(&mut y);
        }
        out.push(y[which]);
    }
    out
}

/// Position of x'' = -x^3 + sin(omega t).
pub fn sprott(y0: [f64; 2], omega: f64, dt: f64, stride: usize, transient: usize, n: usize) -> Vec<f64> {
    integrate(|t, y| [y[1], -y[0].powi(3) + (omega * t).sin()], y0, dt, stride, transient, n, 0)
}

#[derive(Debug, Clone, Copy)]
pub struct Pendulum {
    pub damping: f64,
    pub drive: f64,
    pub omega: f64,
}

impl Pendulum {
    /// Angular velocity of theta'' = -damping theta' - sin theta + drive cos(omega t).
    /// The angle itself winds without bound once the pendulum rotates.
    pub fn integrate(&self, y0: [f64; 2], dt: f64, stride: usize, transient: usize, n: usize) -> Vec<f64> {
        let p = *self;
        integrate(
            move |t, y| [y[1], -p.damping * y[1] - y[0].sin() + p.drive * (p.omega * t).cos()],
            y0,
            dt,
            stride,
            transient,
            n,
            1,
        )
    }
}

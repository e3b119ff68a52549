//! Direct-definition reference implementations. These deliberately avoid the
//! library's code paths (no FFT, no shared helpers) and run in O(T^2) where the
//! definition does.
#![allow(dead_code)]

use std::collections::HashMap;

pub fn mean(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v;
    }
    s / x.len() as f64
}

pub fn sample_std(x: &[f64]) -> f64 {
    let m = mean(x);
    let mut s = 0.0;
    for v in x {
        s += (v - m) * (v - m);
    }
    (s / (x.len() - 1) as f64).sqrt()
}

pub fn zscore(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    let s = sample_std(x);
    x.iter().map(|v| (v - m) / s).collect()
}

/// (1/T) sum (x_t - mu)(x_{t+lag} - mu) / var_pop
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let t = x.len();
    let mu = mean(x);
    let mut var = 0.0;
    for v in x {
        var += (v - mu) * (v - mu);
    }
    var /= t as f64;
    let mut acc = 0.0;
    for i in 0..t - lag {
        acc += (x[i] - mu) * (x[i + lag] - mu);
    }
    acc / t as f64 / var
}

pub fn acf_first_zero(x: &[f64], max_lag: usize) -> usize {
    for lag in 1..=max_lag {
        if autocorrelation(x, lag) <= 0.0 {
            return lag;
        }
    }
    max_lag
}

pub fn acf_first_below(x: &[f64], threshold: f64, max_lag: usize) -> usize {
    for lag in 1..=max_lag {
        if autocorrelation(x, lag) < threshold {
            return lag;
        }
    }
    max_lag
}

pub fn stat_av(x: &[f64], nseg: usize) -> f64 {
    let len = x.len() / nseg;
    let means: Vec<f64> = (0..nseg).map(|s| mean(&x[s * len..(s + 1) * len])).collect();
    sample_std(&means) / sample_std(x)
}

/// Periodogram by the O(T^2) DFT sum, bins k = 1..=T/2.
pub fn periodogram_dft(x: &[f64]) -> Vec<f64> {
    let t = x.len();
    (1..=t / 2)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (n, v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * n % t) as f64 / t as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re * re + im * im) / t as f64
        })
        .collect()
}

pub fn spectral_centroid(x: &[f64]) -> f64 {
    let p = periodogram_dft(&zscore(x));
    let t = x.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, pk) in p.iter().enumerate() {
        num += (i + 1) as f64 / t * pk;
        den += pk;
    }
    num / den
}

/// Ordinal patterns as rank tuples; a tie ranks the earlier sample lower.
pub fn permutation_entropy(x: &[f64], order: usize, lag: usize) -> f64 {
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    let windows = x.len() - (order - 1) * lag;
    for s in 0..windows {
        let w: Vec<f64> = (0..order).map(|k| x[s + k * lag]).collect();
        let ranks: Vec<usize> =
            (0..order).map(|a| (0..order).filter(|&b| w[b] < w[a] || (w[b] == w[a] && b < a)).count()).collect();
        *counts.entry(ranks).or_default() += 1;
    }
    let mut h = 0.0;
    for &c in counts.values() {
        let p = c as f64 / windows as f64;
        h -= p * p.ln();
    }
    let fact: usize = (1..=order).product();
    h / (fact as f64).ln()
}

/// Detrended fluctuation analysis by explicit per-window normal equations.
pub fn dfa(x: &[f64]) -> f64 {
    let z = zscore(x);
    let mut profile = Vec::with_capacity(z.len());
    let mut acc = 0.0;
    for v in &z {
        acc += v;
        profile.push(acc);
    }
    let t = z.len();
    let hi = (t / 4) as f64;
    let mut sizes: Vec<usize> =
        (0..10).map(|i| (4f64.ln() + i as f64 * (hi.ln() - 4f64.ln()) / 9.0).exp().round() as usize).collect();
    sizes.dedup();
    let mut ln_n = vec![];
    let mut ln_f = vec![];
    for &n in &sizes {
        let mut f_sum = 0.0;
        let windows = t / n;
        for w in 0..windows {
            let seg = &profile[w * n..(w + 1) * n];
            let (mut s1, mut st, mut stt, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (j, y) in seg.iter().enumerate() {
                let tj = j as f64;
                s1 += 1.0;
                st += tj;
                stt += tj * tj;
                sy += y;
                sty += tj * y;
            }
            let det = s1 * stt - st * st;
            let b = (s1 * sty - st * sy) / det;
            let a = (sy - b * st) / s1;
            let mut ss = 0.0;
            for (j, y) in seg.iter().enumerate() {
                let r = y - (a + b * j as f64);
                ss += r * r;
            }
            f_sum += (ss / n as f64).sqrt();
        }
        ln_n.push((n as f64).ln());
        ln_f.push((f_sum / windows as f64).ln());
    }
    let mx = mean(&ln_n);
    let my = mean(&ln_f);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in ln_n.iter().zip(&ln_f) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

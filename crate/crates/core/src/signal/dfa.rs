use crate::error::{CoreError, Result};
use crate::scalar::{ols_slope, Scalar};

use super::zscore;

pub const DFA_MIN_LEN: usize = 64;
const DFA_SCALES: usize = 10;
const DFA_MIN_WINDOW: usize = 4;
const FLUCTUATION_FLOOR: f64 = 1e-12;

/// Window sizes: `DFA_SCALES` log-spaced integers in `[4, len/4]`, duplicates removed.
pub fn dfa_window_sizes(len: usize) -> Vec<usize> {
    let hi = (len / 4).max(DFA_MIN_WINDOW) as f64;
    let lo = DFA_MIN_WINDOW as f64;
    let step = (hi.ln() - lo.ln()) / (DFA_SCALES - 1) as f64;
    let mut sizes: Vec<usize> = (0..DFA_SCALES).map(|i| (lo.ln() + step * i as f64).exp().round() as usize).collect();
    sizes.dedup();
    sizes
}

/// Mean over non-overlapping windows of the RMS residual after a linear fit.
/// Tail samples that do not fill a window are discarded.
pub(crate) fn fluctuation<T: Scalar>(profile: &[T], window: usize) -> T {
    let n = T::from_len(window);
    let t_mean = (n - T::one()) / T::lit(2.0);
    let t_ss: T = (0..window)
        .map(|j| {
            let d = T::from_len(j) - t_mean;
            d * d
        })
        .sum();
    let windows = profile.len() / window;
    let mut total = T::zero();
    for chunk in profile.chunks_exact(window).take(windows) {
        let y_mean = chunk.iter().copied().sum::<T>() / n;
        let sty: T = chunk.iter().enumerate().map(|(j, &y)| (T::from_len(j) - t_mean) * (y - y_mean)).sum();
        let slope = sty / t_ss;
        let ss: T = chunk
            .iter()
            .enumerate()
            .map(|(j, &y)| {
                let r = y - (y_mean + slope * (T::from_len(j) - t_mean));
                r * r
            })
            .sum();
        total = total + (ss / n).sqrt();
    }
    total / T::from_len(windows)
}

/// Scaling exponent from an already-integrated profile. `None` when the
/// fluctuations vanish so the log-log fit is undefined.
pub(crate) fn dfa_from_profile<T: Scalar>(profile: &[T]) -> Option<T> {
    let sizes = dfa_window_sizes(profile.len());
    let floor = T::lit(FLUCTUATION_FLOOR);
    let mut log_n = Vec::with_capacity(sizes.len());
    let mut log_f = Vec::with_capacity(sizes.len());
    for &size in &sizes {
        let f = fluctuation(profile, size);
        if !(f >= floor) {
            return None;
        }
        log_n.push(T::from_len(size).ln());
        log_f.push(f.ln());
    }
    ols_slope(&log_n, &log_f)
}

/// Detrended fluctuation analysis exponent of the z-scored series.
///
/// Returns `Ok(None)` (the undefined sentinel) when every window is fitted
/// perfectly by its linear trend.
pub fn dfa_exponent<T: Scalar>(x: &[T]) -> Result<Option<T>> {
    if x.len() < DFA_MIN_LEN {
        return Err(CoreError::SeriesTooShort { len: x.len(), min: DFA_MIN_LEN });
    }
    let z = zscore(x)?;
    Ok(dfa_prepared(&z))
}

pub(crate) fn dfa_prepared<T: Scalar>(z: &[T]) -> Option<T> {
    let mut acc = T::zero();
    let profile: Vec<T> = z
        .iter()
        .map(|&v| {
            acc = acc + v;
            acc
        })
        .collect();
    dfa_from_profile(&profile)
}

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{CoreError, Result};
use crate::scalar::{ols_slope, Scalar};

use super::zscore;

pub const SPECTRAL_MIN_LEN: usize = 64;
/// Share of the non-DC bins counted as "low frequency".
pub const LOW_FREQUENCY_SHARE: f64 = 0.2;

/// One-sided periodogram excluding DC: entry `k - 1` holds `|X_k|^2 / T` at
/// frequency `k / T` cycles per sample, for `k = 1..=T/2`.
pub fn periodogram<T: Scalar>(x: &[T]) -> Vec<T> {
    let n = x.len();
    let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    FftPlanner::<T>::new().plan_fft_forward(n).process(&mut buf);
    let scale = T::from_len(n);
    buf[1..=n / 2].iter().map(|c| c.norm_sqr() / scale).collect()
}

pub(crate) fn frequency<T: Scalar>(bin: usize, len: usize) -> T {
    T::from_len(bin + 1) / T::from_len(len)
}

pub(crate) fn centroid_of<T: Scalar>(power: &[T], len: usize) -> Option<T> {
    let total: T = power.iter().copied().sum();
    if !(total > T::zero()) {
        return None;
    }
    let weighted: T = power.iter().enumerate().map(|(k, &p)| frequency::<T>(k, len) * p).sum();
    Some(weighted / total)
}

pub(crate) fn low_power_fraction_of<T: Scalar>(power: &[T]) -> Option<T> {
    let total: T = power.iter().copied().sum();
    if !(total > T::zero()) {
        return None;
    }
    let m = ((power.len() as f64 * LOW_FREQUENCY_SHARE).floor() as usize).max(1);
    Some(power[..m].iter().copied().sum::<T>() / total)
}

/// Least-squares slope of log power against log frequency over bins with
/// positive power.
pub(crate) fn log_log_slope_of<T: Scalar>(power: &[T], len: usize) -> Option<T> {
    let (lf, lp): (Vec<T>, Vec<T>) = power
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > T::zero())
        .map(|(k, &p)| (frequency::<T>(k, len).ln(), p.ln()))
        .unzip();
    ols_slope(&lf, &lp)
}

fn prepared<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    if x.len() < SPECTRAL_MIN_LEN {
        return Err(CoreError::SeriesTooShort { len: x.len(), min: SPECTRAL_MIN_LEN });
    }
    Ok(periodogram(&zscore(x)?))
}

/// Power-weighted mean frequency of the z-scored series, in cycles per sample.
pub fn spectral_centroid<T: Scalar>(x: &[T]) -> Result<T> {
    let power = prepared(x)?;
    centroid_of(&power, x.len()).ok_or(CoreError::DegenerateSeries)
}

/// Fraction of periodogram power in the lowest 20% of the non-DC bins.
pub fn low_frequency_power<T: Scalar>(x: &[T]) -> Result<T> {
    let power = prepared(x)?;
    low_power_fraction_of(&power).ok_or(CoreError::DegenerateSeries)
}

/// Slope of the log-periodogram against log-frequency; `None` when fewer than
/// two bins carry power.
pub fn spectral_slope<T: Scalar>(x: &[T]) -> Result<Option<T>> {
    let power = prepared(x)?;
    Ok(log_log_slope_of(&power, x.len()))
}

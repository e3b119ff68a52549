use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{CoreError, Result};
use crate::scalar::{mean, Scalar};

/// Largest lag scanned by the autocorrelation-crossing features.
pub const DEFAULT_MAX_LAG: usize = 400;

pub fn default_max_lag(len: usize) -> usize {
    len.saturating_sub(1).min(DEFAULT_MAX_LAG)
}

pub(crate) fn is_constant<T: Scalar>(x: &[T]) -> bool {
    x.iter().all(|&v| v == x[0])
}

/// Biased autocorrelation estimate at `lag`, computed directly from the definition.
///
/// `AC(lag) = (1/T) * sum_{t < T-lag} (x_t - mu)(x_{t+lag} - mu) / var`, with `mu` and
/// `var` the full-series mean and population variance.
pub fn autocorrelation<T: Scalar>(x: &[T], lag: usize) -> Result<T> {
    if lag == 0 {
        return Err(CoreError::InvalidParameter("lag must be positive".into()));
    }
    if lag >= x.len() {
        return Err(CoreError::LagOutOfRange { lag, len: x.len() });
    }
    if is_constant(x) {
        return Err(CoreError::DegenerateSeries);
    }
    let mu = mean(x);
    let denom: T = x.iter().map(|&v| (v - mu) * (v - mu)).sum();
    if denom <= T::zero() {
        return Err(CoreError::DegenerateSeries);
    }
    let num: T = x.iter().zip(&x[lag..]).map(|(&a, &b)| (a - mu) * (b - mu)).sum();
    Ok(num / denom)
}

/// Autocorrelation for lags `0..=max_lag` via zero-padded FFT.
///
/// Entry 0 is always one. Agrees with [`autocorrelation`] to rounding error.
pub fn autocorrelation_function<T: Scalar>(x: &[T], max_lag: usize) -> Result<Vec<T>> {
    if max_lag >= x.len() {
        return Err(CoreError::LagOutOfRange { lag: max_lag, len: x.len() });
    }
    if is_constant(x) {
        return Err(CoreError::DegenerateSeries);
    }
    let n = x.len();
    let mu = mean(x);
    let padded = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<T>> = x
        .iter()
        .map(|&v| Complex::new(v - mu, T::zero()))
        .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
        .take(padded)
        .collect();

    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(padded).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), T::zero());
    }
    planner.plan_fft_inverse(padded).process(&mut buf);

    let r0 = buf[0].re;
    if r0 <= T::zero() {
        return Err(CoreError::DegenerateSeries);
    }
    Ok(buf[..=max_lag].iter().map(|c| c.re / r0).collect())
}

/// Smallest lag `>= 1` whose autocorrelation is `<= 0`; `max_lag` when none crosses.
pub fn acf_first_zero<T: Scalar>(x: &[T], max_lag: usize) -> Result<usize> {
    if max_lag == 0 {
        return Err(CoreError::InvalidParameter("max_lag must be positive".into()));
    }
    let acf = autocorrelation_function(x, max_lag)?;
    Ok(first_lag_where(&acf, |ac| ac <= T::zero()))
}

/// Smallest lag `>= 1` whose autocorrelation drops strictly below `threshold`.
pub fn acf_first_below<T: Scalar>(x: &[T], threshold: T, max_lag: usize) -> Result<usize> {
    if max_lag == 0 {
        return Err(CoreError::InvalidParameter("max_lag must be positive".into()));
    }
    let acf = autocorrelation_function(x, max_lag)?;
    Ok(first_lag_where(&acf, |ac| ac < threshold))
}

pub(crate) fn first_lag_where<T: Scalar>(acf: &[T], pred: impl Fn(T) -> bool) -> usize {
    let max_lag = acf.len() - 1;
    (1..=max_lag).find(|&tau| pred(acf[tau])).unwrap_or(max_lag)
}

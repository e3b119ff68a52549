//! Feature kernels and the canonical 20-feature vector (`CF-20/v1`).
//!
//! Every feature is computed on the z-scored series, so the vector is invariant
//! to positive affine changes of measurement units.

mod autocorr;
mod dfa;
mod distribution;
mod ordinal;
mod spectral;
mod stationarity;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::{mean, sample_std, Scalar};

pub use autocorr::{
    acf_first_below, acf_first_zero, autocorrelation, autocorrelation_function, default_max_lag, DEFAULT_MAX_LAG,
};
pub use dfa::{dfa_exponent, dfa_window_sizes, DFA_MIN_LEN};
pub use distribution::{
    mean_abs_successive_difference, outlier_fraction, time_reversal_asymmetry, zero_crossing_rate, Histogram,
};
pub use ordinal::{ordinal_pattern_counts, permutation_entropy};
pub use spectral::{low_frequency_power, periodogram, spectral_centroid, spectral_slope, SPECTRAL_MIN_LEN};
pub use stationarity::{longest_run_above_mean, stat_av, window_std_ratio};

pub const FEATURE_SET_ID: &str = "CF-20/v1";
pub const FEATURE_COUNT: usize = 20;
pub const MIN_SERIES_LEN: usize = 32;

/// A validated univariate series: finite values, at least [`MIN_SERIES_LEN`] samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries<T>(Vec<T>);

impl<T: Scalar> RawSeries<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NonFiniteValue { index });
        }
        if values.len() < MIN_SERIES_LEN {
            return Err(CoreError::SeriesTooShort { len: values.len(), min: MIN_SERIES_LEN });
        }
        Ok(RawSeries(values))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> AsRef<[T]> for RawSeries<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

/// Subtract the mean and divide by the sample standard deviation.
pub fn zscore<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    if x.len() < 2 {
        return Err(CoreError::SeriesTooShort { len: x.len(), min: 2 });
    }
    if autocorr::is_constant(x) {
        return Err(CoreError::DegenerateSeries);
    }
    let mu = mean(x);
    let sd = sample_std(x);
    if !(sd > T::zero()) || !sd.is_finite() {
        return Err(CoreError::DegenerateSeries);
    }
    Ok(x.iter().map(|&v| (v - mu) / sd).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureCategory {
    Distribution,
    AutocorrelationPredictability,
    Stationarity,
    Scaling,
    Complexity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureDescriptor {
    pub index: usize,
    pub name: &'static str,
    pub category: FeatureCategory,
    pub definition: &'static str,
}

macro_rules! descriptors {
    ($($idx:expr, $name:expr, $cat:ident, $def:expr;)*) => {
        [$(FeatureDescriptor { index: $idx, name: $name, category: FeatureCategory::$cat, definition: $def }),*]
    };
}

static DESCRIPTORS: [FeatureDescriptor; FEATURE_COUNT] = descriptors! {
    0, "ac_lag1", AutocorrelationPredictability, "biased autocorrelation at lag 1";
    1, "ac_lag9", AutocorrelationPredictability, "biased autocorrelation at lag 9";
    2, "acf_first_zero", AutocorrelationPredictability, "first lag with AC <= 0 (max lag 400)";
    3, "acf_first_1e", AutocorrelationPredictability, "first lag with AC < 1/e (max lag 400)";
    4, "time_reversal_asymmetry", Complexity, "mean((z[t+1] - z[t])^3)";
    5, "permutation_entropy", AutocorrelationPredictability, "ordinal-pattern entropy, order 3, lag 1, over ln(3!)";
    6, "spectral_centroid", AutocorrelationPredictability, "sum f P(f) / sum P(f), non-DC periodogram";
    7, "low_frequency_power", AutocorrelationPredictability, "share of power in the lowest 20% of non-DC bins";
    8, "stat_av_5", Stationarity, "std of 5 segment means / std of series";
    9, "stat_av_10", Stationarity, "std of 10 segment means / std of series";
    10, "window_std_ratio", Stationarity, "std of 10 window stds / std of series";
    11, "dfa_alpha", Scaling, "DFA exponent over 10 log-spaced scales in [4, T/4]";
    12, "spectral_slope", Scaling, "least-squares slope of ln P(f) against ln f";
    13, "hist5_mode", Distribution, "bin center of the 5-bin histogram mode";
    14, "hist10_mode", Distribution, "bin center of the 10-bin histogram mode";
    15, "outlier_fraction", Distribution, "fraction of samples with |z| > 2";
    16, "hist10_entropy", Distribution, "10-bin histogram entropy over ln 10";
    17, "mean_abs_diff", Complexity, "mean |z[t+1] - z[t]|";
    18, "zero_crossing_rate", Complexity, "fraction of successive pairs changing sign";
    19, "longest_run_above_mean", Stationarity, "longest run with z > 0, over T";
};

pub fn descriptors() -> &'static [FeatureDescriptor; FEATURE_COUNT] {
    &DESCRIPTORS
}

/// Feature values in canonical order; `None` is the undefined sentinel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    pub values: Vec<Option<T>>,
    pub feature_set_id: String,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(values: Vec<Option<T>>) -> Self {
        FeatureVector { values, feature_set_id: FEATURE_SET_ID.to_string() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<T> {
        self.values.get(i).copied().flatten()
    }

    pub fn defined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

impl<T> AsRef<[Option<T>]> for FeatureVector<T> {
    fn as_ref(&self) -> &[Option<T>] {
        &self.values
    }
}

fn ok_finite<T: Scalar>(v: Result<T>) -> Option<T> {
    v.ok().filter(|x| x.is_finite())
}

/// Map a series onto the canonical feature vector.
///
/// Sub-features whose preconditions fail (too short, degenerate) are left
/// undefined; only a constant series fails the whole vector.
pub fn compute_feature_vector<T: Scalar>(series: &RawSeries<T>) -> Result<FeatureVector<T>> {
    compute_features(series.values())
}

/// As [`compute_feature_vector`] on an unvalidated slice.
pub fn compute_features<T: Scalar>(x: &[T]) -> Result<FeatureVector<T>> {
    if x.len() < MIN_SERIES_LEN {
        return Err(CoreError::SeriesTooShort { len: x.len(), min: MIN_SERIES_LEN });
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(CoreError::NonFiniteValue { index });
    }
    let z = zscore(x)?;
    let n = z.len();

    let acf = autocorrelation_function(&z, default_max_lag(n)).ok();
    let ac_at = |lag: usize| acf.as_ref().and_then(|a| a.get(lag).copied());
    let first_zero = acf.as_ref().map(|a| T::from_len(autocorr::first_lag_where(a, |v| v <= T::zero())));
    let inv_e = T::one() / T::E();
    let first_1e = acf.as_ref().map(|a| T::from_len(autocorr::first_lag_where(a, |v| v < inv_e)));

    let power = (n >= SPECTRAL_MIN_LEN).then(|| periodogram(&z));
    let centroid = power.as_ref().and_then(|p| spectral::centroid_of(p, n));
    let low_power = power.as_ref().and_then(|p| spectral::low_power_fraction_of(p));
    let slope = power.as_ref().and_then(|p| spectral::log_log_slope_of(p, n));

    let dfa = (n >= DFA_MIN_LEN).then(|| dfa::dfa_prepared(&z)).flatten();

    let h5 = Histogram::new(&z, 5);
    let h10 = Histogram::new(&z, 10);

    let values = vec![
        ac_at(1),
        ac_at(9),
        first_zero,
        first_1e,
        Some(time_reversal_asymmetry(&z)),
        ok_finite(permutation_entropy(&z, 3, 1)),
        centroid,
        low_power,
        ok_finite(stat_av(&z, 5)),
        ok_finite(stat_av(&z, 10)),
        ok_finite(window_std_ratio(&z, 10)),
        dfa,
        slope,
        Some(h5.mode()),
        Some(h10.mode()),
        Some(outlier_fraction(&z, T::lit(2.0))),
        Some(h10.normalized_entropy()),
        Some(mean_abs_successive_difference(&z)),
        Some(zero_crossing_rate(&z)),
        Some(longest_run_above_mean(&z)),
    ];
    debug_assert_eq!(values.len(), FEATURE_COUNT);
    let values = values.into_iter().map(|v| v.filter(|x| x.is_finite())).collect();
    Ok(FeatureVector::new(values))
}

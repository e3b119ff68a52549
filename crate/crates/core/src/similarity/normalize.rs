use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// Ratio between the interquartile range and the standard deviation of a Gaussian.
pub const IQR_PER_SIGMA: f64 = 1.349;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats<T> {
    pub median: T,
    pub iqr: T,
    pub sigmoid_min: T,
    pub sigmoid_max: T,
    pub defined_count: usize,
}

/// Library-wide robust-sigmoid parameters for one normalization epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats<T> {
    pub epoch: u64,
    /// Number of series the stats were fitted on.
    pub library_size: usize,
    pub features: Vec<FeatureStats<T>>,
    pub excluded: BTreeSet<usize>,
}

impl<T: Scalar> NormalizationStats<T> {
    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn included_count(&self) -> usize {
        self.features.len() - self.excluded.len()
    }

    pub fn is_included(&self, feature: usize) -> bool {
        feature < self.features.len() && !self.excluded.contains(&feature)
    }

    fn sigmoid(&self, feature: usize, x: T) -> T {
        let s = &self.features[feature];
        robust_sigmoid(x, s.median, s.iqr)
    }

    /// Normalized value of a single feature, `None` if excluded or undefined.
    pub fn normalize_value(&self, feature: usize, x: Option<T>) -> Option<T> {
        let x = x?;
        if !self.is_included(feature) || !x.is_finite() {
            return None;
        }
        let s = &self.features[feature];
        let scaled = (self.sigmoid(feature, x) - s.sigmoid_min) / (s.sigmoid_max - s.sigmoid_min);
        Some(scaled.max(T::zero()).min(T::one()))
    }
}

/// `1 / (1 + exp(-(x - median) / (iqr / 1.349)))`.
pub fn robust_sigmoid<T: Scalar>(x: T, median: T, iqr: T) -> T {
    let scale = iqr / T::lit(IQR_PER_SIGMA);
    T::one() / (T::one() + (-(x - median) / scale).exp())
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = T::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn sorted_column<T: Scalar, V: AsRef<[Option<T>]>>(rows: &[V], feature: usize) -> Vec<T> {
    let mut col: Vec<T> =
        rows.iter().filter_map(|r| r.as_ref().get(feature).copied().flatten()).filter(|v| v.is_finite()).collect();
    col.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    col
}

/// Fit per-feature median, IQR and post-sigmoid range over the defined values
/// of each column. The returned epoch is `previous_epoch + 1`.
pub fn fit_normalization<T: Scalar, V: AsRef<[Option<T>]>>(
    rows: &[V],
    previous_epoch: u64,
) -> Result<NormalizationStats<T>> {
    if rows.len() < 2 {
        return Err(CoreError::LibraryTooSmall { size: rows.len(), min: 2 });
    }
    let width = rows[0].as_ref().len();
    if rows.iter().any(|r| r.as_ref().len() != width) {
        return Err(CoreError::InvalidParameter("feature vectors differ in length".into()));
    }
    let mut features = Vec::with_capacity(width);
    let mut excluded = BTreeSet::new();
    for j in 0..width {
        let col = sorted_column(rows, j);
        let zero = FeatureStats {
            median: T::zero(),
            iqr: T::zero(),
            sigmoid_min: T::zero(),
            sigmoid_max: T::zero(),
            defined_count: col.len(),
        };
        if col.len() < 2 {
            excluded.insert(j);
            features.push(zero);
            continue;
        }
        let median = quantile_sorted(&col, 0.5);
        let iqr = quantile_sorted(&col, 0.75) - quantile_sorted(&col, 0.25);
        // sigmoid is monotone, so the extremes of the column bound its image
        let lo = robust_sigmoid(col[0], median, iqr);
        let hi = robust_sigmoid(col[col.len() - 1], median, iqr);
        let stats = FeatureStats { median, iqr, sigmoid_min: lo, sigmoid_max: hi, defined_count: col.len() };
        let usable = iqr > T::zero() && [median, iqr, lo, hi].iter().all(|v| v.is_finite()) && hi > lo;
        if usable {
            features.push(stats);
        } else {
            excluded.insert(j);
            features.push(FeatureStats { defined_count: col.len(), ..zero });
        }
    }
    Ok(NormalizationStats { epoch: previous_epoch + 1, library_size: rows.len(), features, excluded })
}

/// Feature vector mapped into the unit cube of one epoch; `None` marks an
/// excluded feature or an undefined input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedVector<T> {
    pub epoch: u64,
    pub values: Vec<Option<T>>,
    /// Number of features the epoch includes.
    pub included: usize,
}

pub fn normalize<T: Scalar>(v: &[Option<T>], stats: &NormalizationStats<T>) -> NormalizedVector<T> {
    let values = (0..stats.feature_count()).map(|j| stats.normalize_value(j, v.get(j).copied().flatten())).collect();
    NormalizedVector { epoch: stats.epoch, values, included: stats.included_count() }
}

/// Growth-triggered refit rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefitPolicy {
    pub min_growth_fraction: f64,
    pub min_growth_count: usize,
}

impl Default for RefitPolicy {
    fn default() -> Self {
        RefitPolicy { min_growth_fraction: 0.05, min_growth_count: 100 }
    }
}

impl RefitPolicy {
    /// `fitted_size` is `None` when no stats exist yet.
    pub fn should_refit(&self, fitted_size: Option<usize>, current_size: usize) -> bool {
        if current_size < 2 {
            return false;
        }
        let Some(fitted) = fitted_size else { return true };
        let growth = current_size.saturating_sub(fitted);
        growth >= self.min_growth_count || (growth > 0 && growth as f64 >= self.min_growth_fraction * fitted as f64)
    }
}

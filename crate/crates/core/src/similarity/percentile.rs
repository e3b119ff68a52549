use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PercentileFlag {
    ExceptionallyLow,
    Low,
    Typical,
    High,
    ExceptionallyHigh,
}

impl PercentileFlag {
    pub fn from_percentile(p: f64) -> Self {
        if p < 1.0 {
            PercentileFlag::ExceptionallyLow
        } else if p < 10.0 {
            PercentileFlag::Low
        } else if p <= 90.0 {
            PercentileFlag::Typical
        } else if p <= 99.0 {
            PercentileFlag::High
        } else {
            PercentileFlag::ExceptionallyHigh
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePercentile {
    pub percentile: f64,
    pub flag: PercentileFlag,
}

/// Sorted per-feature library columns for percentile lookups.
#[derive(Debug, Clone, Default)]
pub struct PercentileTable<T> {
    columns: Vec<Vec<T>>,
}

impl<T: Scalar> PercentileTable<T> {
    pub fn build<V: AsRef<[Option<T>]>>(rows: &[V], width: usize) -> Self {
        let mut columns = vec![Vec::with_capacity(rows.len()); width];
        for row in rows {
            for (j, v) in row.as_ref().iter().enumerate().take(width) {
                if let Some(v) = v.filter(|v| v.is_finite()) {
                    columns[j].push(v);
                }
            }
        }
        for c in &mut columns {
            c.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        }
        PercentileTable { columns }
    }

    pub fn column_len(&self, feature: usize) -> usize {
        self.columns.get(feature).map_or(0, Vec::len)
    }

    /// `100 * (below + ties / 2) / N` over the defined library values.
    pub fn percentile(&self, feature: usize, value: T) -> Option<f64> {
        let col = self.columns.get(feature)?;
        if col.is_empty() || !value.is_finite() {
            return None;
        }
        let below = col.partition_point(|&x| x < value);
        let not_above = col.partition_point(|&x| x <= value);
        let ties = not_above - below;
        Some(100.0 * (below as f64 + 0.5 * ties as f64) / col.len() as f64)
    }

    pub fn percentiles(&self, v: &[Option<T>]) -> Vec<Option<FeaturePercentile>> {
        (0..self.columns.len())
            .map(|j| {
                let x = v.get(j).copied().flatten()?;
                let p = self.percentile(j, x)?;
                Some(FeaturePercentile { percentile: p, flag: PercentileFlag::from_percentile(p) })
            })
            .collect()
    }
}

use crate::scalar::Scalar;

/// Equal-width histogram over `[min, max]`; a value on an interior bin edge
/// falls in the upper bin and the maximum lands in the last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    pub counts: Vec<usize>,
    pub min: T,
    pub width: T,
}

impl<T: Scalar> Histogram<T> {
    pub fn new(x: &[T], bins: usize) -> Self {
        assert!(bins > 0 && !x.is_empty());
        let min = x.iter().copied().fold(T::infinity(), T::min);
        let max = x.iter().copied().fold(T::neg_infinity(), T::max);
        let width = (max - min) / T::from_len(bins);
        let mut counts = vec![0usize; bins];
        for &v in x {
            let bin =
                if width > T::zero() { ((v - min) / width).floor().to_usize().unwrap_or(0).min(bins - 1) } else { 0 };
            counts[bin] += 1;
        }
        Histogram { counts, min, width }
    }

    pub fn center(&self, bin: usize) -> T {
        self.min + (T::from_len(bin) + T::lit(0.5)) * self.width
    }

    /// Center of the most populated bin; the lowest such bin wins ties.
    pub fn mode(&self) -> T {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        self.center(best)
    }

    /// Shannon entropy of the bin occupancy divided by `ln(bins)`.
    pub fn normalized_entropy(&self) -> T {
        let total = T::from_len(self.counts.iter().sum());
        let h: T = self
            .counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = T::from_len(c) / total;
                -p * p.ln()
            })
            .sum();
        h / T::from_len(self.counts.len()).ln()
    }
}

pub fn outlier_fraction<T: Scalar>(z: &[T], threshold: T) -> T {
    T::from_len(z.iter().filter(|v| v.abs() > threshold).count()) / T::from_len(z.len())
}

/// `mean((x_{t+1} - x_t)^3)`.
pub fn time_reversal_asymmetry<T: Scalar>(x: &[T]) -> T {
    let d: T = x.windows(2).map(|w| (w[1] - w[0]).powi(3)).sum();
    d / T::from_len(x.len() - 1)
}

pub fn mean_abs_successive_difference<T: Scalar>(x: &[T]) -> T {
    let d: T = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    d / T::from_len(x.len() - 1)
}

/// Fraction of successive pairs whose signs differ (zero counts as positive).
pub fn zero_crossing_rate<T: Scalar>(z: &[T]) -> T {
    let c = z.windows(2).filter(|w| (w[0] >= T::zero()) != (w[1] >= T::zero())).count();
    T::from_len(c) / T::from_len(z.len() - 1)
}

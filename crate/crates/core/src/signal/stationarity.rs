use crate::error::{CoreError, Result};
use crate::scalar::{mean, sample_std, Scalar};

use super::autocorr::is_constant;

/// Dispersion of segment means relative to the global dispersion.
///
/// The series is cut into `nseg` contiguous segments of `T / nseg` samples; the
/// remainder at the tail is discarded.
pub fn stat_av<T: Scalar>(x: &[T], nseg: usize) -> Result<T> {
    if nseg < 2 {
        return Err(CoreError::InvalidParameter("nseg must be at least 2".into()));
    }
    if x.len() < 2 * nseg {
        return Err(CoreError::SeriesTooShort { len: x.len(), min: 2 * nseg });
    }
    if is_constant(x) {
        return Err(CoreError::DegenerateSeries);
    }
    let seg_len = x.len() / nseg;
    let means: Vec<T> = x.chunks_exact(seg_len).take(nseg).map(mean).collect();
    Ok(sample_std(&means) / sample_std(x))
}

/// Sample std of the per-window sample stds over `nwin` non-overlapping
/// windows, divided by the global sample std.
pub fn window_std_ratio<T: Scalar>(x: &[T], nwin: usize) -> Result<T> {
    if nwin < 2 {
        return Err(CoreError::InvalidParameter("nwin must be at least 2".into()));
    }
    if x.len() < 2 * nwin {
        return Err(CoreError::SeriesTooShort { len: x.len(), min: 2 * nwin });
    }
    if is_constant(x) {
        return Err(CoreError::DegenerateSeries);
    }
    let len = x.len() / nwin;
    let stds: Vec<T> = x.chunks_exact(len).take(nwin).map(sample_std).collect();
    Ok(sample_std(&stds) / sample_std(x))
}

/// Longest run of consecutive samples strictly above the mean, as a fraction
/// of the series length.
pub fn longest_run_above_mean<T: Scalar>(x: &[T]) -> T {
    let mu = mean(x);
    let mut best = 0usize;
    let mut run = 0usize;
    for &v in x {
        if v > mu {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    T::from_len(best) / T::from_len(x.len())
}

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

use super::autocorr::is_constant;

const MAX_ORDER: usize = 8;
/// Samples required beyond one embedding window.
const PE_MARGIN: usize = 32;

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Lehmer code of a permutation of `0..perm.len()`.
fn lehmer_code(perm: &[usize]) -> usize {
    let m = perm.len();
    let mut code = 0;
    for i in 0..m {
        let smaller_right = perm[i + 1..].iter().filter(|&&p| p < perm[i]).count();
        code = code * (m - i) + smaller_right;
    }
    code
}

/// Ordinal pattern (argsort) of one embedding window. Equal values keep their
/// temporal order, so the earlier sample ranks lower.
fn ordinal_pattern<T: Scalar>(x: &[T], start: usize, lag: usize, idx: &mut [usize]) {
    for (k, slot) in idx.iter_mut().enumerate() {
        *slot = k;
    }
    idx.sort_by(|&a, &b| x[start + a * lag].partial_cmp(&x[start + b * lag]).unwrap_or(std::cmp::Ordering::Equal));
}

/// Histogram of ordinal-pattern codes, indexed by Lehmer code.
pub fn ordinal_pattern_counts<T: Scalar>(x: &[T], order: usize, lag: usize) -> Vec<usize> {
    let span = (order - 1) * lag;
    let mut counts = vec![0usize; factorial(order)];
    let mut idx = vec![0usize; order];
    for start in 0..x.len().saturating_sub(span) {
        ordinal_pattern(x, start, lag, &mut idx);
        counts[lehmer_code(&idx)] += 1;
    }
    counts
}

/// Normalized permutation entropy `H / ln(order!)` in `[0, 1]`.
pub fn permutation_entropy<T: Scalar>(x: &[T], order: usize, lag: usize) -> Result<T> {
    if !(2..=MAX_ORDER).contains(&order) {
        return Err(CoreError::InvalidParameter(format!("order must be in 2..={MAX_ORDER}")));
    }
    if lag == 0 {
        return Err(CoreError::InvalidParameter("lag must be positive".into()));
    }
    let min = order * lag + PE_MARGIN;
    if x.len() < min {
        return Err(CoreError::SeriesTooShort { len: x.len(), min });
    }
    if is_constant(x) {
        return Err(CoreError::DegenerateSeries);
    }
    let counts = ordinal_pattern_counts(x, order, lag);
    let total = T::from_len(counts.iter().sum());
    let h: T = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = T::from_len(c) / total;
            -p * p.ln()
        })
        .sum();
    Ok((h / T::from_len(factorial(order)).ln()).max(T::zero()))
}

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar the numeric kernels are generic over.
///
/// Implemented for `f32` and `f64`. The library layers above this crate use
/// `f64` exclusively; `f32` is supported for memory-constrained batch work.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` constant.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn from_len(n: usize) -> Self {
        Self::from_usize(n).expect("length representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::from_len(xs.len())
}

/// Sample variance (divisor `n - 1`).
pub(crate) fn sample_variance<T: Scalar>(xs: &[T]) -> T {
    let m = mean(xs);
    let ss: T = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    ss / T::from_len(xs.len() - 1)
}

pub(crate) fn sample_std<T: Scalar>(xs: &[T]) -> T {
    sample_variance(xs).sqrt()
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn ols_slope<T: Scalar>(xs: &[T], ys: &[T]) -> Option<T> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
    }
    if sxx <= T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    slope.is_finite().then_some(slope)
}

//! Numeric core of the time-series library: canonical feature extraction,
//! robust normalization with exact nearest-neighbor search, and
//! low-dimensional projection.
//!
//! Kernels are generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! the scalar to `f64`, which is what the storage and service layers use.

// `!(x > 0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod projection;
pub mod scalar;
pub mod signal;
pub mod similarity;

pub use error::{CoreError, Result};
pub use scalar::Scalar;

pub type RawSeries = signal::RawSeries<f64>;
pub type FeatureVector = signal::FeatureVector<f64>;
pub type NormalizationStats = similarity::NormalizationStats<f64>;
pub type NormalizedVector = similarity::NormalizedVector<f64>;
pub type SimilarityIndex<K> = similarity::SimilarityIndex<K, f64>;
pub type NeighborGraph<K> = similarity::NeighborGraph<K, f64>;
pub type Neighbor<K> = similarity::Neighbor<K, f64>;
pub type PercentileTable = similarity::PercentileTable<f64>;
pub type Pca = projection::Pca<f64>;
pub type Tsne = projection::Tsne<f64>;

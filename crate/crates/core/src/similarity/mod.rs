//! Library-wide normalization, feature-space distance, exact k-nearest-neighbor
//! retrieval, neighbor graphs and percentile flags.

mod graph;
mod index;
mod normalize;
mod percentile;

pub use graph::{
    build_neighbor_graph, similarity_weight, EdgeThreshold, GraphEdge, GraphNode, NeighborGraph,
    ADAPTIVE_EDGE_QUANTILE, DEFAULT_NEIGHBORS,
};
pub use index::{distance, IndexEntry, Neighbor, SimilarityIndex};
pub use normalize::{
    fit_normalization, normalize, quantile_sorted, robust_sigmoid, FeatureStats, NormalizationStats, NormalizedVector,
    RefitPolicy, IQR_PER_SIGMA,
};
pub use percentile::{FeaturePercentile, PercentileFlag, PercentileTable};

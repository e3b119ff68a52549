use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

use super::index::SimilarityIndex;
use super::normalize::quantile_sorted;

pub const DEFAULT_NEIGHBORS: usize = 12;
/// Quantile of the target-neighbor distances used as the adaptive edge threshold.
pub const ADAPTIVE_EDGE_QUANTILE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeThreshold<T> {
    Fixed(T),
    /// 25th percentile of the target-neighbor distances in the graph.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode<K, T> {
    pub id: K,
    pub category: String,
    /// Zero for the target itself.
    pub distance: T,
    pub similarity: T,
}

/// Undirected edge; stored once with `a` preceding `b` in node order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge<K, T> {
    pub a: K,
    pub b: K,
    pub distance: T,
    pub weight: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborGraph<K, T> {
    pub target: K,
    /// Target first, then neighbors in ascending distance.
    pub nodes: Vec<GraphNode<K, T>>,
    pub edges: Vec<GraphEdge<K, T>>,
    pub k: usize,
    pub tau: T,
    pub epoch: u64,
}

impl<K: PartialEq, T> NeighborGraph<K, T> {
    pub fn degree(&self, id: &K) -> usize {
        self.edges.iter().filter(|e| &e.a == id || &e.b == id).count()
    }
}

pub fn similarity_weight<T: Scalar>(distance: T) -> T {
    T::one() / (T::one() + distance)
}

/// Target plus its `k` nearest neighbors. Every target-neighbor pair is linked;
/// two neighbors are linked when their distance is strictly below `tau`.
pub fn build_neighbor_graph<K, T>(
    index: &SimilarityIndex<K, T>,
    target: &K,
    k: usize,
    threshold: EdgeThreshold<T>,
) -> Result<NeighborGraph<K, T>>
where
    K: Clone + Ord + Hash + Send + Sync,
    T: Scalar,
{
    let entry = index.get(target).ok_or(CoreError::NotFound)?;
    let neighbors = index.k_nearest(target, k)?;

    let tau = match threshold {
        EdgeThreshold::Fixed(t) => t,
        EdgeThreshold::Adaptive if neighbors.is_empty() => T::zero(),
        EdgeThreshold::Adaptive => {
            let d: Vec<T> = neighbors.iter().map(|n| n.distance).collect();
            quantile_sorted(&d, ADAPTIVE_EDGE_QUANTILE)
        }
    };

    let mut nodes = vec![GraphNode {
        id: target.clone(),
        category: entry.category.clone(),
        distance: T::zero(),
        similarity: T::one(),
    }];
    let mut edges = Vec::new();
    for n in &neighbors {
        let e = index.get(&n.id).expect("neighbor is indexed");
        nodes.push(GraphNode {
            id: n.id.clone(),
            category: e.category.clone(),
            distance: n.distance,
            similarity: similarity_weight(n.distance),
        });
        edges.push(GraphEdge {
            a: target.clone(),
            b: n.id.clone(),
            distance: n.distance,
            weight: similarity_weight(n.distance),
        });
    }
    for i in 0..neighbors.len() {
        for j in i + 1..neighbors.len() {
            let (a, b) = (&neighbors[i].id, &neighbors[j].id);
            if let Ok(d) = index.distance_between(a, b) {
                if d < tau {
                    edges.push(GraphEdge { a: a.clone(), b: b.clone(), distance: d, weight: similarity_weight(d) });
                }
            }
        }
    }
    Ok(NeighborGraph { target: target.clone(), nodes, edges, k, tau, epoch: index.epoch() })
}

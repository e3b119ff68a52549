use std::cmp::Ordering;
use std::collections::HashMap;
use std::hash::Hash;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

use super::normalize::{normalize, NormalizationStats, NormalizedVector};

/// Euclidean distance over the features defined in both vectors, scaled by
/// `sqrt(included / common)` so partially defined vectors stay comparable.
pub fn distance<T: Scalar>(a: &NormalizedVector<T>, b: &NormalizedVector<T>) -> Result<T> {
    if a.epoch != b.epoch {
        return Err(CoreError::EpochMismatch { left: a.epoch, right: b.epoch });
    }
    let mut common = 0usize;
    let mut ss = T::zero();
    for (x, y) in a.values.iter().zip(&b.values) {
        if let (Some(x), Some(y)) = (x, y) {
            common += 1;
            ss = ss + (*x - *y) * (*x - *y);
        }
    }
    if common == 0 {
        return Err(CoreError::NoCommonFeatures);
    }
    let scale = (T::from_len(a.included.max(common)) / T::from_len(common)).sqrt();
    Ok(ss.sqrt() * scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor<K, T> {
    pub id: K,
    pub distance: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry<K, T> {
    pub id: K,
    pub category: String,
    pub vector: NormalizedVector<T>,
}

/// Immutable exact-search snapshot of the library at one normalization epoch.
///
/// Cloning is cheap: entries are shared, so inserting into a clone leaves the
/// original snapshot untouched for readers still holding it.
#[derive(Debug, Clone)]
pub struct SimilarityIndex<K, T> {
    stats: Arc<NormalizationStats<T>>,
    entries: Vec<Arc<IndexEntry<K, T>>>,
    position: HashMap<K, usize>,
}

impl<K, T> SimilarityIndex<K, T>
where
    K: Clone + Ord + Hash + Send + Sync,
    T: Scalar,
{
    pub fn new(stats: NormalizationStats<T>) -> Self {
        SimilarityIndex { stats: Arc::new(stats), entries: Vec::new(), position: HashMap::new() }
    }

    /// Normalize every row with `stats` and index it.
    pub fn build<'a, I>(stats: NormalizationStats<T>, rows: I) -> Self
    where
        I: IntoIterator<Item = (K, String, &'a [Option<T>])>,
    {
        let mut index = Self::new(stats);
        for (id, category, features) in rows {
            index.insert(id, category, features);
        }
        index
    }

    pub fn stats(&self) -> &NormalizationStats<T> {
        &self.stats
    }

    pub fn epoch(&self) -> u64 {
        self.stats.epoch
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &K) -> bool {
        self.position.contains_key(id)
    }

    pub fn get(&self, id: &K) -> Option<&IndexEntry<K, T>> {
        self.position.get(id).map(|&i| self.entries[i].as_ref())
    }

    pub fn entries(&self) -> impl Iterator<Item = &IndexEntry<K, T>> {
        self.entries.iter().map(|e| e.as_ref())
    }

    pub fn normalize(&self, features: &[Option<T>]) -> NormalizedVector<T> {
        normalize(features, &self.stats)
    }

    /// Insert or replace the entry for `id`.
    pub fn insert(&mut self, id: K, category: String, features: &[Option<T>]) {
        let vector = self.normalize(features);
        let entry = Arc::new(IndexEntry { id: id.clone(), category, vector });
        match self.position.get(&id) {
            Some(&i) => self.entries[i] = entry,
            None => {
                self.position.insert(id, self.entries.len());
                self.entries.push(entry);
            }
        }
    }

    pub fn remove(&mut self, id: &K) -> bool {
        let Some(i) = self.position.remove(id) else { return false };
        self.entries.swap_remove(i);
        if i < self.entries.len() {
            self.position.insert(self.entries[i].id.clone(), i);
        }
        true
    }

    pub fn distance_between(&self, a: &K, b: &K) -> Result<T> {
        let ea = self.get(a).ok_or(CoreError::NotFound)?;
        let eb = self.get(b).ok_or(CoreError::NotFound)?;
        distance(&ea.vector, &eb.vector)
    }

    /// The `k` closest entries to `query`, ascending by distance with ties
    /// broken by id. Entries sharing no defined feature with the query are
    /// skipped.
    pub fn k_nearest_to_vector(
        &self,
        query: &NormalizedVector<T>,
        k: usize,
        exclude: Option<&K>,
    ) -> Result<Vec<Neighbor<K, T>>> {
        if self.entries.is_empty() {
            return Err(CoreError::EmptyLibrary);
        }
        if query.epoch != self.epoch() {
            return Err(CoreError::EpochMismatch { left: query.epoch, right: self.epoch() });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut scored: Vec<(T, usize)> = self
            .entries
            .par_iter()
            .enumerate()
            .filter(|(_, e)| exclude != Some(&e.id))
            .filter_map(|(i, e)| distance(query, &e.vector).ok().map(|d| (d, i)))
            .collect();
        let cmp = |a: &(T, usize), b: &(T, usize)| -> Ordering {
            a.0.partial_cmp(&b.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.entries[a.1].id.cmp(&self.entries[b.1].id))
        };
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_by(cmp);
        Ok(scored.into_iter().map(|(d, i)| Neighbor { id: self.entries[i].id.clone(), distance: d }).collect())
    }

    /// Nearest library members of an indexed series, never including itself.
    pub fn k_nearest(&self, target: &K, k: usize) -> Result<Vec<Neighbor<K, T>>> {
        let entry = self.get(target).ok_or(CoreError::NotFound)?;
        self.k_nearest_to_vector(&entry.vector, k, Some(target))
    }
}

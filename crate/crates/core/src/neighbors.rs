//! Exact Euclidean nearest-neighbor queries and the local density statistic.
//!
//! All searches are brute force. Ties on distance are broken by the lower
//! instance index, so results do not depend on scan order.

use std::cmp::Ordering;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Neighbors of one query instance, nearest first. The query itself is never included.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborResult {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl NeighborResult {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Largest neighbor distance, 0 when there are no neighbors.
    pub fn max_distance(&self) -> f64 {
        self.distances.last().copied().unwrap_or(0.0)
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Parameter(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(euclidean_unchecked(a, b))
}

#[inline]
pub(crate) fn euclidean_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn nearest_of(ds: &Dataset, i: usize, candidates: impl Iterator<Item = usize>, k: usize) -> NeighborResult {
    let query = ds.row(i);
    let mut scored: Vec<(f64, usize)> = candidates
        .filter(|&j| j != i)
        .map(|j| (euclidean_unchecked(query, ds.row(j)), j))
        .collect();
    let k = k.min(scored.len());
    if k < scored.len() && k > 0 {
        scored.select_nth_unstable_by(k - 1, by_distance_then_index);
        scored.truncate(k);
    } else {
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_distance_then_index);
    NeighborResult {
        indices: scored.iter().map(|p| p.1).collect(),
        distances: scored.iter().map(|p| p.0).collect(),
    }
}

/// The `k` nearest instances of the whole dataset to instance `i`.
///
/// The effective neighbor count is `min(k, n - 1)`.
pub fn knn(ds: &Dataset, i: usize, k: usize) -> Result<NeighborResult> {
    check_query(ds, i, k)?;
    if ds.n() < 2 {
        return Err(Error::InsufficientData(format!(
            "nearest-neighbor search needs at least 2 instances, got {}",
            ds.n()
        )));
    }
    Ok(nearest_of(ds, i, 0..ds.n(), k))
}

/// Like [`knn`] but restricted to the instances in `pool`. `i` may or may not
/// belong to `pool`; it is excluded either way.
pub fn knn_within(ds: &Dataset, i: usize, pool: &[usize], k: usize) -> Result<NeighborResult> {
    check_query(ds, i, k)?;
    let res = nearest_of(ds, i, pool.iter().copied(), k);
    if res.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no candidate neighbors for instance {i} in a pool of {}",
            pool.len()
        )));
    }
    Ok(res)
}

fn check_query(ds: &Dataset, i: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    if i >= ds.n() {
        return Err(Error::Parameter(format!(
            "instance {i} out of range for {} instances",
            ds.n()
        )));
    }
    Ok(())
}

/// Distance from instance `i` to the farthest of its `k` nearest neighbors.
pub fn max_knn_distance(ds: &Dataset, i: usize, k: usize) -> Result<f64> {
    Ok(knn(ds, i, k)?.max_distance())
}

/// Fraction of the `k` nearest neighbors of `i` that share its class.
pub fn local_density(ds: &Dataset, i: usize, k: usize) -> Result<f64> {
    let nn = knn(ds, i, k)?;
    Ok(same_class_fraction(ds, i, &nn))
}

pub(crate) fn same_class_fraction(ds: &Dataset, i: usize, nn: &NeighborResult) -> f64 {
    let same = nn
        .indices
        .iter()
        .filter(|&&j| ds.label(j) == ds.label(i))
        .count();
    same as f64 / nn.len() as f64
}

/// Lazily computed whole-dataset neighborhoods for a fixed `k`.
///
/// Oversamplers query the same instances many times; entries are computed once
/// on first use and always refer to the dataset the cache was built over.
pub struct NeighborCache<'a> {
    ds: &'a Dataset,
    k: usize,
    entries: Vec<Option<NeighborResult>>,
}

impl<'a> NeighborCache<'a> {
    pub fn new(ds: &'a Dataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if ds.n() < 2 {
            return Err(Error::InsufficientData(format!(
                "nearest-neighbor search needs at least 2 instances, got {}",
                ds.n()
            )));
        }
        Ok(NeighborCache {
            ds,
            k,
            entries: vec![None; ds.n()],
        })
    }

    pub fn get(&mut self, i: usize) -> &NeighborResult {
        let (ds, k) = (self.ds, self.k);
        self.entries[i].get_or_insert_with(|| nearest_of(ds, i, 0..ds.n(), k))
    }

    pub fn max_distance(&mut self, i: usize) -> f64 {
        self.get(i).max_distance()
    }

    pub fn local_density(&mut self, i: usize) -> f64 {
        let ds = self.ds;
        same_class_fraction(ds, i, self.get(i))
    }

    /// Number of neighbors of `i` with the other class, and the neighborhood size.
    pub fn opposite_count(&mut self, i: usize) -> (usize, usize) {
        let ds = self.ds;
        let nn = self.get(i);
        let opposite = nn
            .indices
            .iter()
            .filter(|&&j| ds.label(j) != ds.label(i))
            .count();
        (opposite, nn.len())
    }
}

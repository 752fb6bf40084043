//! Closest-point correspondences between a source cloud and an indexed
//! destination cloud, followed by outlier rejection.

pub mod kdtree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloud};

pub use kdtree::{KdTree, LinearScan, DEFAULT_LEAF_SIZE};

/// Source clouds at least this large are matched on the rayon pool.
const PARALLEL_MATCH_THRESHOLD: usize = 512;

/// Nearest-neighbor index over destination points.
#[derive(Debug, Clone)]
pub enum SpatialIndex {
    KdTree(KdTree),
    Exhaustive(LinearScan),
}

impl SpatialIndex {
    /// k-d tree with the default leaf size.
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        Self::build_with_leaf_size(cloud, DEFAULT_LEAF_SIZE)
    }

    pub fn build_with_leaf_size(cloud: &PointCloud, leaf_size: usize) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok(SpatialIndex::KdTree(KdTree::new(cloud.points(), leaf_size)))
    }

    pub fn exhaustive(cloud: &PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok(SpatialIndex::Exhaustive(LinearScan::new(cloud.points())))
    }

    pub fn len(&self) -> usize {
        match self {
            SpatialIndex::KdTree(t) => t.len(),
            SpatialIndex::Exhaustive(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(dest_index, squared_distance)` of the closest stored point, ties to the lowest index.
    pub fn nearest(&self, query: &Point) -> (usize, f64) {
        let hit = match self {
            SpatialIndex::KdTree(t) => t.nearest(query),
            SpatialIndex::Exhaustive(s) => s.nearest(query),
        };
        hit.expect("spatial index is never empty")
    }

    pub fn knn(&self, query: &Point, k: usize) -> Vec<(usize, f64)> {
        match self {
            SpatialIndex::KdTree(t) => t.knn(query, k),
            SpatialIndex::Exhaustive(s) => s.knn(query, k),
        }
    }
}

pub fn build_index(cloud: &PointCloud) -> Result<SpatialIndex> {
    SpatialIndex::build(cloud)
}

pub fn nearest(index: &SpatialIndex, query: &Point) -> (usize, f64) {
    index.nearest(query)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: usize,
    pub dest: usize,
    /// `‖d_dest − s_source‖²`
    pub squared_distance: f64,
}

/// Surviving pairs, ordered by source index, at most one per source point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrespondenceSet {
    pairs: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn new(mut pairs: Vec<Correspondence>) -> Self {
        pairs.sort_by_key(|p| p.source);
        pairs.dedup_by_key(|p| p.source);
        Self { pairs }
    }

    /// Pairs each index with itself, for clouds already in correspondence.
    pub fn identity(source: &PointCloud, dest: &PointCloud) -> Self {
        let n = source.len().min(dest.len());
        Self {
            pairs: (0..n)
                .map(|i| Correspondence {
                    source: i,
                    dest: i,
                    squared_distance: kdtree::squared_distance(source.point(i), dest.point(i)),
                })
                .collect(),
        }
    }

    pub fn pairs(&self) -> &[Correspondence] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Correspondence> {
        self.pairs.iter()
    }

    /// Keeps only the pairs accepted by `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&Correspondence) -> bool) -> Self {
        Self {
            pairs: self.pairs.iter().copied().filter(|p| keep(p)).collect(),
        }
    }
}

impl<'a> IntoIterator for &'a CorrespondenceSet {
    type Item = &'a Correspondence;
    type IntoIter = std::slice::Iter<'a, Correspondence>;

    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}

/// Outlier rejection applied after closest-point matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum RejectionPolicy {
    /// Keep every candidate.
    None,
    /// Drop pairs farther apart than this many meters.
    MaxDistance(f64),
    /// Drop this fraction `f ∈ [0, 1)` of the worst pairs, keeping `⌈(1−f)·n⌉`.
    TrimFraction(f64),
    /// Drop pairs farther than this multiple of the median candidate distance.
    MedianMultiple(f64),
}

impl Default for RejectionPolicy {
    fn default() -> Self {
        RejectionPolicy::MedianMultiple(2.5)
    }
}

impl RejectionPolicy {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RejectionPolicy::None => true,
            RejectionPolicy::MaxDistance(cap) => cap.is_finite() && cap >= 0.0,
            RejectionPolicy::TrimFraction(f) => (0.0..1.0).contains(&f),
            RejectionPolicy::MedianMultiple(k) => k.is_finite() && k > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad rejection policy {self:?}")))
        }
    }

    fn apply(&self, candidates: Vec<Correspondence>) -> Vec<Correspondence> {
        match *self {
            RejectionPolicy::None => candidates,
            RejectionPolicy::MaxDistance(cap) => candidates
                .into_iter()
                .filter(|c| c.squared_distance.sqrt() <= cap)
                .collect(),
            RejectionPolicy::TrimFraction(f) => {
                let keep = ((1.0 - f) * candidates.len() as f64).ceil() as usize;
                let mut ranked = candidates;
                ranked.sort_by(|a, b| {
                    a.squared_distance
                        .total_cmp(&b.squared_distance)
                        .then(a.source.cmp(&b.source))
                });
                ranked.truncate(keep);
                ranked.sort_by_key(|c| c.source);
                ranked
            }
            RejectionPolicy::MedianMultiple(k) => {
                let cap = k * median_distance(&candidates);
                candidates
                    .into_iter()
                    .filter(|c| c.squared_distance.sqrt() <= cap)
                    .collect()
            }
        }
    }
}

fn median_distance(candidates: &[Correspondence]) -> f64 {
    let mut d: Vec<f64> = candidates.iter().map(|c| c.squared_distance.sqrt()).collect();
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    }
}

/// One closest-point candidate per source point, then `policy`.
///
/// Large sources are matched in parallel; the result is identical to the
/// sequential evaluation.
pub fn match_points(
    source: &PointCloud,
    index: &SpatialIndex,
    policy: RejectionPolicy,
) -> Result<CorrespondenceSet> {
    if source.is_empty() {
        return Err(Error::EmptyCloud);
    }
    policy.validate()?;
    let candidate = |(i, p): (usize, &Point)| {
        let (dest, squared_distance) = index.nearest(p);
        Correspondence {
            source: i,
            dest,
            squared_distance,
        }
    };
    let candidates: Vec<Correspondence> = if source.len() >= PARALLEL_MATCH_THRESHOLD {
        source.points().par_iter().enumerate().map(candidate).collect()
    } else {
        source.points().iter().enumerate().map(candidate).collect()
    };
    let pairs = policy.apply(candidates);
    if pairs.is_empty() {
        return Err(Error::NoCorrespondences);
    }
    Ok(CorrespondenceSet { pairs })
}

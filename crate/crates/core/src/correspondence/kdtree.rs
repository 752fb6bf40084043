//! Balanced k-d tree over 3D points with exact, index-tie-broken queries.
//!
//! Results are identical to an exhaustive scan, ties included: a subtree is
//! skipped only when its splitting plane is *strictly* farther than the
//! current best, and the per-axis gap never exceeds the full squared distance
//! under round-to-nearest, so no equal-distance candidate is ever pruned.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::Point;

pub const DEFAULT_LEAF_SIZE: usize = 16;

#[inline]
pub(crate) fn squared_distance(a: &Point, b: &Point) -> f64 {
    (a - b).norm_squared()
}

/// `(squared_distance, index)` ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Candidate {
    #[inline]
    fn beats(&self, other: &Candidate) -> bool {
        self.d2 < other.d2 || (self.d2 == other.d2 && self.index < other.index)
    }
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    leaf_size: usize,
}

impl KdTree {
    /// Builds over `points`; `leaf_size` is clamped to at least 1.
    pub fn new(points: &[Point], leaf_size: usize) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
            leaf_size: leaf_size.max(1),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= self.leaf_size {
            return id;
        }

        let axis = self.widest_axis(start, end);
        let points = &self.points;
        let mid = (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis]
                .total_cmp(&points[b][axis])
                .then(a.cmp(&b))
        });
        let value = points[self.order[start + mid]][axis];

        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
            .unwrap_or(0)
    }

    /// Nearest stored point as `(index, squared_distance)`; `None` if empty.
    pub fn nearest(&self, query: &Point) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = Candidate {
            d2: f64::INFINITY,
            index: usize::MAX,
        };
        self.nearest_in(0, query, &mut best);
        Some((best.index, best.d2))
    }

    fn nearest_in(&self, node: usize, query: &Point, best: &mut Candidate) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        d2: squared_distance(query, &self.points[i]),
                        index: i,
                    };
                    if c.beats(best) {
                        *best = c;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_in(near, query, best);
                if diff * diff <= best.d2 {
                    self.nearest_in(far, query, best);
                }
            }
        }
    }

    /// The `k` nearest points sorted by `(squared_distance, index)`.
    pub fn knn(&self, query: &Point, k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_in(0, query, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.d2)).collect()
    }

    fn knn_in(&self, node: usize, query: &Point, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        d2: squared_distance(query, &self.points[i]),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if heap.peek().is_some_and(|worst| c.beats(worst)) {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_in(near, query, k, heap);
                let bound = if heap.len() < k {
                    f64::INFINITY
                } else {
                    heap.peek().map_or(f64::INFINITY, |w| w.d2)
                };
                if diff * diff <= bound {
                    self.knn_in(far, query, k, heap);
                }
            }
        }
    }
}

/// Exhaustive nearest-neighbor search; the reference the tree is tested against.
#[derive(Debug, Clone)]
pub struct LinearScan {
    points: Vec<Point>,
}

impl LinearScan {
    pub fn new(points: &[Point]) -> Self {
        Self {
            points: points.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest(&self, query: &Point) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in self.points.iter().enumerate() {
            let d2 = squared_distance(query, p);
            if best.is_none_or(|(_, b)| d2 < b) {
                best = Some((i, d2));
            }
        }
        best
    }

    pub fn knn(&self, query: &Point, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, squared_distance(query, p)))
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }
}

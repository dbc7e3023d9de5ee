//! Planar point patterns and Kth nearest-neighbour distances.
//!
//! Distances are plain Euclidean distances between observed points. No edge
//! correction is applied: a point near the window boundary simply sees fewer
//! neighbours on one side.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this size queries fall back to the all-pairs scan.
const BRUTE_FORCE_BELOW: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned rectangular observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Window {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        // written so that NaN bounds are rejected too
        if !(xmin < xmax && ymin < ymax) || !(xmax - xmin).is_finite() || !(ymax - ymin).is_finite()
        {
            return Err(Error::InvalidWindow {
                xmin,
                xmax,
                ymin,
                ymax,
            });
        }
        Ok(Self {
            xmin,
            xmax,
            ymin,
            ymax,
        })
    }

    /// The square `[lo, hi] x [lo, hi]`.
    pub fn square(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, lo, hi)
    }

    pub fn unit() -> Self {
        Self::square(0.0, 1.0).expect("unit square is valid")
    }

    /// Smallest window containing every point. Degenerate extents are padded
    /// by one unit so that the result always has positive area.
    pub fn bounding(points: &[Point]) -> Result<Self> {
        let mut it = points.iter();
        let first = it.next().ok_or(Error::TooFewPoints { n: 0, k: 0 })?;
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (first.x, first.x, first.y, first.y);
        for p in it {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        if xmin == xmax {
            xmin -= 0.5;
            xmax += 0.5;
        }
        if ymin == ymax {
            ymin -= 0.5;
            ymax += 0.5;
        }
        Self::new(xmin, xmax, ymin, ymax)
    }

    pub fn xmin(&self) -> f64 {
        self.xmin
    }
    pub fn xmax(&self) -> f64 {
        self.xmax
    }
    pub fn ymin(&self) -> f64 {
        self.ymin
    }
    pub fn ymax(&self) -> f64 {
        self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Closed containment test (boundary counts as inside).
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        other.xmin >= self.xmin
            && other.xmax <= self.xmax
            && other.ymin >= self.ymin
            && other.ymax <= self.ymax
    }

    /// Smallest window covering both.
    pub fn union(&self, other: &Window) -> Window {
        Window {
            xmin: self.xmin.min(other.xmin),
            xmax: self.xmax.max(other.xmax),
            ymin: self.ymin.min(other.ymin),
            ymax: self.ymax.max(other.ymax),
        }
    }
}

/// Ground-truth class of a simulated or annotated point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Clutter,
    Feature,
}

impl Label {
    pub fn is_feature(self) -> bool {
        self == Label::Feature
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Clutter => "clutter",
            Label::Feature => "feature",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "clutter" => Ok(Label::Clutter),
            "feature" => Ok(Label::Feature),
            other => Err(format!(
                "unknown label '{other}' (expected clutter or feature)"
            )),
        }
    }
}

/// A planar point set observed in a rectangular window.
///
/// Point order is stable: every per-point output in this crate is
/// index-aligned with `points()`. Patterns obtained through [`PointPattern::subset`]
/// remember, for each of their points, the index it had in the parent.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    points: Vec<Point>,
    window: Window,
    truth: Option<Vec<Label>>,
    parent_index: Vec<usize>,
}

impl PointPattern {
    pub fn new(points: Vec<Point>, window: Window) -> Result<Self> {
        for (index, p) in points.iter().enumerate() {
            if !window.contains(p) {
                return Err(Error::PointOutsideWindow {
                    index,
                    x: p.x,
                    y: p.y,
                });
            }
        }
        let parent_index = (0..points.len()).collect();
        Ok(Self {
            points,
            window,
            truth: None,
            parent_index,
        })
    }

    pub fn with_truth(mut self, truth: Vec<Label>) -> Result<Self> {
        if truth.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                expected: self.points.len(),
                got: truth.len(),
            });
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn truth(&self) -> Option<&[Label]> {
        self.truth.as_deref()
    }

    /// For each point, its index in the pattern this one was subset from.
    /// Identity for patterns that were not produced by [`PointPattern::subset`].
    pub fn parent_index(&self) -> &[usize] {
        &self.parent_index
    }

    /// Restricts the pattern to the points with `keep[i] == true`.
    ///
    /// The window is unchanged and truth labels follow their points.
    pub fn subset(&self, keep: &[bool]) -> Result<PointPattern> {
        if keep.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                expected: self.points.len(),
                got: keep.len(),
            });
        }
        let idx: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
        Ok(PointPattern {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            window: self.window,
            truth: self
                .truth
                .as_ref()
                .map(|t| idx.iter().map(|&i| t[i]).collect()),
            parent_index: idx,
        })
    }
}

/// Kth nearest-neighbour distances of a pattern, index-aligned with it.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnDistances {
    pub k: usize,
    pub d: Vec<f64>,
}

impl KnnDistances {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

/// Distance from every point to its `k`-th closest other point.
///
/// A point is never its own neighbour but duplicates of it are, at distance
/// zero. Equal distances are not disambiguated: the result is the `k`-th
/// order statistic of the distances to all other points.
pub fn knn_distances(pattern: &PointPattern, k: usize) -> Result<KnnDistances> {
    if k < 1 {
        return Err(Error::InvalidK(k));
    }
    let n = pattern.len();
    if n <= k {
        return Err(Error::TooFewPoints { n, k });
    }
    let d = if n < BRUTE_FORCE_BELOW {
        knn_brute_force(pattern.points(), k)
    } else {
        KdTree::build(pattern.points()).kth_distances(k)
    };
    Ok(KnnDistances { k, d })
}

/// All-pairs scan: sorts the distances from each point to every other point.
pub fn knn_brute_force(points: &[Point], k: usize) -> Vec<f64> {
    let n = points.len();
    assert!(k >= 1 && k < n, "need 1 <= k < n");
    let mut buf = Vec::with_capacity(n - 1);
    (0..n)
        .map(|i| {
            buf.clear();
            buf.extend(
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| points[i].dist2(&points[j])),
            );
            let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
            kth.sqrt()
        })
        .collect()
}

/// Implicit 2-d tree: every subslice `[lo, hi)` stores its splitting point at
/// the midpoint, smaller coordinates to the left.
struct KdTree<'a> {
    points: &'a [Point],
    // original indices, permuted into tree order
    order: Vec<usize>,
    // split axis of the node stored at each tree position
    axis: Vec<u8>,
}

#[derive(PartialEq)]
struct HeapEntry(f64);

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl<'a> KdTree<'a> {
    fn build(points: &'a [Point]) -> Self {
        let n = points.len();
        let mut tree = KdTree {
            points,
            order: (0..n).collect(),
            axis: vec![0; n],
        };
        tree.build_range(0, n);
        tree
    }

    fn coord(&self, idx: usize, axis: u8) -> f64 {
        let p = &self.points[idx];
        if axis == 0 {
            p.x
        } else {
            p.y
        }
    }

    fn build_range(&mut self, lo: usize, hi: usize) {
        if hi - lo <= 1 {
            return;
        }
        // split along the axis of larger spread
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for &i in &self.order[lo..hi] {
            let p = &self.points[i];
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        let axis: u8 = if xmax - xmin >= ymax - ymin { 0 } else { 1 };
        let mid = lo + (hi - lo) / 2;
        let points = self.points;
        let key = |i: &usize| {
            if axis == 0 {
                points[*i].x
            } else {
                points[*i].y
            }
        };
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |a, b| key(a).total_cmp(&key(b)));
        self.axis[mid] = axis;
        self.build_range(lo, mid);
        self.build_range(mid + 1, hi);
    }

    fn kth_distances(&self, k: usize) -> Vec<f64> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        (0..self.points.len())
            .map(|i| {
                heap.clear();
                self.search(0, self.points.len(), i, k, &mut heap);
                heap.peek().expect("k >= 1 neighbours found").0.sqrt()
            })
            .collect()
    }

    fn search(
        &self,
        lo: usize,
        hi: usize,
        query: usize,
        k: usize,
        heap: &mut BinaryHeap<HeapEntry>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let node = self.order[mid];
        let q = &self.points[query];
        if node != query {
            let d2 = q.dist2(&self.points[node]);
            if heap.len() < k {
                heap.push(HeapEntry(d2));
            } else if d2 < heap.peek().map_or(f64::INFINITY, |e| e.0) {
                heap.pop();
                heap.push(HeapEntry(d2));
            }
        }
        if hi - lo == 1 {
            return;
        }
        let axis = self.axis[mid];
        let diff = self.coord(query, axis) - self.coord(node, axis);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, query, k, heap);
        // points on the far side are at least |diff| away along this axis
        if heap.len() < k || diff * diff < heap.peek().map_or(f64::INFINITY, |e| e.0) {
            self.search(far.0, far.1, query, k, heap);
        }
    }
}

//! Incremental Euclidean restriction: visit targets in increasing straight-
//! line distance, resolve each with a point-to-point search, and stop once
//! the straight-line distance alone already exceeds the k-th best obstacle
//! distance found. Straight-line distance never exceeds obstacle distance,
//! so no unvisited target can improve the answer.

use std::collections::HashSet;

use rstar::primitives::GeomWithData;
use rstar::RTree;

use crate::geometry::Point;
use crate::navmesh::Mesh;
use crate::search::{point_to_point_full, QueryError, SearchStats};

/// Bulk-loaded spatial index over the target set, reusable across queries.
pub struct TargetIndex {
    points: Vec<Point>,
    tree: RTree<GeomWithData<[f64; 2], u32>>,
}

impl TargetIndex {
    pub fn new(targets: &[Point]) -> TargetIndex {
        let entries = targets
            .iter()
            .enumerate()
            .map(|(i, t)| GeomWithData::new([t.x, t.y], i as u32))
            .collect();
        TargetIndex { points: targets.to_vec(), tree: RTree::bulk_load(entries) }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, id: u32) -> Point {
        self.points[id as usize]
    }

    /// All targets exactly once, straight-line distance nondecreasing.
    pub fn stream(&self, q: Point) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.tree
            .nearest_neighbor_iter_with_distance_2(&[q.x, q.y])
            .map(|(entry, d2)| (entry.data, d2.sqrt()))
    }
}

/// The k smallest obstacle distances seen so far; ties broken toward smaller
/// target ids so the retained set is deterministic.
struct CandidateHeap {
    k: usize,
    // Max-heap on (distance, id): the root is the current k-th best.
    heap: std::collections::BinaryHeap<HeapItem>,
}

#[derive(PartialEq)]
struct HeapItem {
    dist: f64,
    id: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist.total_cmp(&other.dist).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl CandidateHeap {
    fn new(k: usize) -> CandidateHeap {
        CandidateHeap { k, heap: std::collections::BinaryHeap::with_capacity(k + 1) }
    }

    fn offer(&mut self, dist: f64, id: u32) {
        self.heap.push(HeapItem { dist, id });
        if self.heap.len() > self.k {
            self.heap.pop();
        }
    }

    fn full(&self) -> bool {
        self.heap.len() == self.k
    }

    fn kth(&self) -> f64 {
        self.heap.peek().map_or(f64::INFINITY, |item| item.dist)
    }

    fn into_sorted(self) -> Vec<(u32, f64)> {
        let mut out: Vec<(u32, f64)> =
            self.heap.into_iter().map(|item| (item.id, item.dist)).collect();
        out.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        out
    }
}

#[derive(Clone, Debug)]
pub struct IerResult {
    /// `(target id, obstacle-avoiding distance)` ascending.
    pub hits: Vec<(u32, f64)>,
    /// Set when fewer than k targets were reachable.
    pub truncated: bool,
    /// Point-to-point searches run, the terminating one included.
    pub searches: u64,
    /// Searched targets that missed the answer, excluding the search whose
    /// own straight-line distance triggered termination: that probe is the
    /// price of the stopping rule, not a mistaken candidate.
    pub false_hits: u64,
    /// Summed over every point-to-point search.
    pub stats: SearchStats,
    /// True when the straight-line bound ended the stream (as opposed to
    /// running out of targets).
    pub bound_terminated: bool,
}

pub fn ier_knn(
    mesh: &Mesh,
    index: &TargetIndex,
    q: Point,
    k: usize,
) -> Result<IerResult, QueryError> {
    ier_knn_impl(mesh, index, q, k, true)
}

/// Termination test disabled: every target gets searched. Same answer as
/// `ier_knn`, useful as a cross-check.
pub fn ier_knn_exhaustive(
    mesh: &Mesh,
    index: &TargetIndex,
    q: Point,
    k: usize,
) -> Result<IerResult, QueryError> {
    ier_knn_impl(mesh, index, q, k, false)
}

fn ier_knn_impl(
    mesh: &Mesh,
    index: &TargetIndex,
    q: Point,
    k: usize,
    terminate: bool,
) -> Result<IerResult, QueryError> {
    if k == 0 {
        return Err(QueryError::ZeroK);
    }
    if index.is_empty() {
        return Err(QueryError::NoTargets);
    }
    if mesh.containing_polygons(q).is_empty() {
        return Err(QueryError::QueryNotTraversable { x: q.x, y: q.y });
    }

    let mut heap = CandidateHeap::new(k);
    let mut stats = SearchStats::default();
    let mut searched: Vec<u32> = Vec::new();
    let mut terminating: Option<u32> = None;

    for (tid, d_e) in index.stream(q) {
        searched.push(tid);
        let (found, search_stats) = point_to_point_full(mesh, q, index.point(tid), false)?;
        stats.absorb(&search_stats);
        // A failed search proves nothing about the remaining stream: its
        // target may sit in a sealed-off region while later, Euclidean-
        // farther targets are still reachable and close.
        let Some((d_o, _)) = found else { continue };
        heap.offer(d_o, tid);
        if terminate && heap.full() && d_e > heap.kth() {
            terminating = Some(tid);
            break;
        }
    }

    let hits = heap.into_sorted();
    let answer: HashSet<u32> = hits.iter().map(|&(id, _)| id).collect();
    let mut false_hits = searched.iter().filter(|id| !answer.contains(id)).count() as u64;
    if let Some(tid) = terminating {
        if !answer.contains(&tid) {
            false_hits -= 1;
        }
    }

    Ok(IerResult {
        truncated: hits.len() < k,
        searches: searched.len() as u64,
        false_hits,
        stats,
        bound_terminated: terminating.is_some(),
        hits,
    })
}

//! Ground-truth reference: visibility graph plus Dijkstra for obstacle
//! distances, and brute-force k-nearest-neighbour answers. Built for clarity,
//! used by tests and debug tooling at desk scale.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::geometry::{segment_intersection, Point, Segment, SegmentIntersection};
use crate::navmesh::{point_in_ring, Containment, Scene};

/// True if the open interior of the ring blocks any part of segment `s`.
/// The segment is cut at every boundary crossing and each piece's midpoint is
/// classified; grazing along edges or through vertices does not block.
fn ring_blocks_segment(s: Segment, ring: &[Point]) -> bool {
    if s.is_degenerate() {
        return point_in_ring(s.a, ring) == Containment::Inside;
    }
    let mut params = vec![0.0, 1.0];
    for i in 0..ring.len() {
        let edge = Segment::new(ring[i], ring[(i + 1) % ring.len()]);
        match segment_intersection(s, edge) {
            SegmentIntersection::None => {}
            SegmentIntersection::Point(p) => params.push(s.param_of(p).clamp(0.0, 1.0)),
            SegmentIntersection::Overlap(p, q) => {
                params.push(s.param_of(p).clamp(0.0, 1.0));
                params.push(s.param_of(q).clamp(0.0, 1.0));
            }
        }
    }
    params.sort_by(f64::total_cmp);
    for w in params.windows(2) {
        if w[1] - w[0] < 1e-12 {
            continue;
        }
        let mid = s.at((w[0] + w[1]) / 2.0);
        if point_in_ring(mid, ring) == Containment::Inside {
            return true;
        }
    }
    false
}

/// Two points are co-visible when the segment between them stays out of every
/// obstacle's open interior. Touching edges or vertices is allowed.
pub fn co_visible(scene: &Scene, a: Point, b: Point) -> bool {
    let s = Segment::new(a, b);
    scene.obstacles.iter().all(|ring| !ring_blocks_segment(s, ring))
}

/// Visibility graph over all obstacle vertices plus caller-supplied points.
/// `points[i]` for `i < extra_offset` are obstacle vertices; extras follow in
/// the order given.
pub struct VisibilityGraph {
    pub points: Vec<Point>,
    pub extra_offset: usize,
    pub adj: Vec<Vec<(u32, f64)>>,
}

pub fn build_vg(scene: &Scene, extra: &[Point]) -> VisibilityGraph {
    let mut points: Vec<Point> = Vec::new();
    for ring in &scene.obstacles {
        points.extend_from_slice(ring);
    }
    let extra_offset = points.len();
    points.extend_from_slice(extra);

    let n = points.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if co_visible(scene, points[i], points[j]) {
                let w = points[i].dist(points[j]);
                adj[i].push((j as u32, w));
                adj[j].push((i as u32, w));
            }
        }
    }
    VisibilityGraph { points, extra_offset, adj }
}

#[derive(PartialEq)]
struct HeapItem(f64, u32);

impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Plain Dijkstra over the graph; unreachable nodes stay at infinity.
pub fn dijkstra(vg: &VisibilityGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; vg.points.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(HeapItem(0.0, source as u32)));
    while let Some(Reverse(HeapItem(d, u))) = heap.pop() {
        if d > dist[u as usize] {
            continue;
        }
        for &(v, w) in &vg.adj[u as usize] {
            let nd = d + w;
            if nd < dist[v as usize] {
                dist[v as usize] = nd;
                heap.push(Reverse(HeapItem(nd, v)));
            }
        }
    }
    dist
}

/// Exact obstacle distance between two traversable points, or `None` when no
/// obstacle-avoiding path exists.
pub fn oracle_distance(scene: &Scene, q: Point, t: Point) -> Option<f64> {
    let vg = build_vg(scene, &[q, t]);
    let dist = dijkstra(&vg, vg.extra_offset);
    let d = dist[vg.extra_offset + 1];
    d.is_finite().then_some(d)
}

/// Brute-force obstacle k-nearest-neighbours of `q` among the scene's
/// targets: one Dijkstra from `q`, then the k smallest reachable distances,
/// ties broken by target id.
pub fn oracle_knn(scene: &Scene, q: Point, k: usize) -> Vec<(usize, f64)> {
    let mut extra = vec![q];
    extra.extend_from_slice(&scene.targets);
    let vg = build_vg(scene, &extra);
    let dist = dijkstra(&vg, vg.extra_offset);
    let mut reachable: Vec<(usize, f64)> = scene
        .targets
        .iter()
        .enumerate()
        .filter_map(|(i, _)| {
            let d = dist[vg.extra_offset + 1 + i];
            d.is_finite().then_some((i, d))
        })
        .collect();
    reachable.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    reachable.truncate(k);
    reachable
}

//! Distance estimators that drive the best-first searches: the three-case
//! point estimator `h_p`, the interval heuristic `h_v`, and the
//! nearest-unretrieved-target heuristic `h_t`.
//!
//! The fence heuristics (`h_f` and its naive form) are evaluated in the
//! `fence` module against stored labels; they reuse `h_p` from here.

use rstar::primitives::GeomWithData;
use rstar::RTree;

use crate::geometry::{
    closest_point_on_segment, mirror_across_line, segment_intersection, signed_area2, Point,
    Segment, SegmentIntersection, EPS_GEOM, EPS_ORIENT,
};

/// Minimum cost of a path that starts at `r`, passes through some point of
/// the interval `[a, b]`, and ends at `t`: `min over p ∈ I of d(r,p) + d(p,t)`.
///
/// Case analysis instead of minimization: if the straight segment r→t crosses
/// the interval the answer is `d(r,t)`; if it misses, the best crossing point
/// is the nearer interval endpoint; if `t` lies on `r`'s side of the
/// interval's supporting line, reflect `t` across it first.
pub fn h_p(r: Point, a: Point, b: Point, t: Point) -> f64 {
    if a.close_to(b, EPS_GEOM) {
        return r.dist(a) + a.dist(t);
    }
    let seg = Segment::new(a, b);
    let side_r = signed_area2(a, b, r);
    let side_t = signed_area2(a, b, t);
    let strictly_same_side = (side_r > EPS_ORIENT && side_t > EPS_ORIENT)
        || (side_r < -EPS_ORIENT && side_t < -EPS_ORIENT);
    let t_eff = if strictly_same_side {
        mirror_across_line(t, seg).expect("non-degenerate interval")
    } else {
        t
    };
    match segment_intersection(Segment::new(r, t_eff), seg) {
        SegmentIntersection::None => {
            (r.dist(a) + a.dist(t_eff)).min(r.dist(b) + b.dist(t_eff))
        }
        _ => r.dist(t_eff),
    }
}

/// Minimum Euclidean distance from the root to any point of the interval.
pub fn h_v(r: Point, a: Point, b: Point) -> f64 {
    closest_point_on_segment(r, Segment::new(a, b)).1
}

type TargetTreeEntry = GeomWithData<[f64; 2], u32>;

/// The target set seen by `h_t`: tracks which targets are already retrieved
/// and answers nearest-unretrieved queries by streaming targets from an
/// R-tree in increasing Euclidean distance from the root.
pub struct TargetTracker {
    points: Vec<Point>,
    retrieved: Vec<bool>,
    remaining: usize,
    tree: RTree<TargetTreeEntry>,
    /// When set, every evaluation is checked against the exhaustive minimum
    /// over all unretrieved targets; a mismatch panics.
    pub verify_exhaustive: bool,
    pub verified_evals: u64,
}

impl TargetTracker {
    pub fn new(targets: &[Point]) -> TargetTracker {
        let entries: Vec<TargetTreeEntry> = targets
            .iter()
            .enumerate()
            .map(|(i, p)| GeomWithData::new([p.x, p.y], i as u32))
            .collect();
        TargetTracker {
            points: targets.to_vec(),
            retrieved: vec![false; targets.len()],
            remaining: targets.len(),
            tree: RTree::bulk_load(entries),
            verify_exhaustive: false,
            verified_evals: 0,
        }
    }

    pub fn mark_retrieved(&mut self, id: u32) {
        if !self.retrieved[id as usize] {
            self.retrieved[id as usize] = true;
            self.remaining -= 1;
        }
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    /// `min over unretrieved t of h_p(r, a, b, t)`, or `None` when every
    /// target is already retrieved.
    ///
    /// Streaming from `r` in Euclidean order is exact: `h_p` through any
    /// interval is at least `d(r, t)`, so once the stream's d_e reaches the
    /// best value found, no later target can improve on it.
    pub fn h_t(&mut self, r: Point, a: Point, b: Point) -> Option<f64> {
        if self.remaining == 0 {
            return None;
        }
        let mut best = f64::INFINITY;
        for (entry, d2) in self.tree.nearest_neighbor_iter_with_distance_2(&[r.x, r.y]) {
            if d2.sqrt() >= best {
                break;
            }
            if self.retrieved[entry.data as usize] {
                continue;
            }
            let t = self.points[entry.data as usize];
            best = best.min(h_p(r, a, b, t));
        }
        if self.verify_exhaustive {
            let exhaustive = self
                .points
                .iter()
                .zip(&self.retrieved)
                .filter(|(_, &done)| !done)
                .map(|(&t, _)| h_p(r, a, b, t))
                .fold(f64::INFINITY, f64::min);
            assert!(
                (best - exhaustive).abs() <= 1e-12 * exhaustive.max(1.0),
                "streamed h_t {best} disagrees with exhaustive {exhaustive}"
            );
            self.verified_evals += 1;
        }
        Some(best)
    }
}

//! k-nearest-neighbour driver over the interval search engine: a single
//! best-first pass that inserts target nodes when a search node enters a
//! target's polygon and retrieves targets as those nodes are popped, in
//! distance order.

use std::collections::HashMap;
use std::time::Instant;

use crate::geometry::Point;
use crate::heuristics::{h_p, h_v, TargetTracker};
use crate::navmesh::Mesh;
use crate::search::{
    start_nodes, successors, Engine, NodeData, NodeKind, QueryError, Root, RootId, SearchStats,
    NO_SOURCE,
};

/// Per-node distance estimate used to order the open list. `estimate` may
/// return infinity (no information); `max_rule` requests clamping a node's f
/// to its parent's, which restores sorted retrieval under estimates that can
/// shrink along a path; `retired` tells stateful estimators to stop counting
/// a retrieved target.
pub trait NodeHeuristic {
    fn estimate(&mut self, edge: u32, root: Point, a: Point, b: Point) -> f64;
    fn max_rule(&self) -> bool {
        false
    }
    fn retired(&mut self, _target: u32) {}
}

/// Orders nodes by the root's distance to the interval alone: cheap,
/// target-independent, never overestimates any continuation.
pub struct IntervalHeuristic;

impl NodeHeuristic for IntervalHeuristic {
    fn estimate(&mut self, _edge: u32, root: Point, a: Point, b: Point) -> f64 {
        h_v(root, a, b)
    }
}

/// Orders nodes by the best obstacle-free bound toward the nearest target
/// not yet retrieved.
pub struct TargetAwareHeuristic {
    pub tracker: TargetTracker,
}

impl NodeHeuristic for TargetAwareHeuristic {
    fn estimate(&mut self, _edge: u32, root: Point, a: Point, b: Point) -> f64 {
        self.tracker.h_t(root, a, b).unwrap_or(f64::INFINITY)
    }
    fn retired(&mut self, target: u32) {
        self.tracker.mark_retrieved(target);
    }
}

#[derive(Clone, Debug)]
pub struct KnnResult {
    /// `(target id, obstacle-avoiding distance)` in retrieval order.
    pub hits: Vec<(u32, f64)>,
    /// Set when fewer than k targets were reachable.
    pub truncated: bool,
    pub stats: SearchStats,
}

/// One best-first search retrieving the `k` targets nearest to `q` by
/// obstacle-avoiding distance. Target nodes are created the moment any
/// expanded node's next polygon contains an unretrieved target (exact there:
/// the polygon is convex, so the estimator's minimum over the interval is the
/// true continuation cost), and popping one retrieves its target.
pub fn knn_search<H: NodeHeuristic>(
    mesh: &Mesh,
    q: Point,
    targets: &[Point],
    k: usize,
    h: &mut H,
    trace: bool,
) -> Result<KnnResult, QueryError> {
    if k == 0 {
        return Err(QueryError::ZeroK);
    }
    if targets.is_empty() {
        return Err(QueryError::NoTargets);
    }
    let q_polys = mesh.containing_polygons(q);
    if q_polys.is_empty() {
        return Err(QueryError::QueryNotTraversable { x: q.x, y: q.y });
    }

    // Which polygons contain which targets; off-mesh targets are never
    // retrievable and simply truncate the answer.
    let mut poly_targets: HashMap<u32, Vec<u32>> = HashMap::new();
    for (ti, t) in targets.iter().enumerate() {
        for pid in mesh.containing_polygons(*t) {
            poly_targets.entry(pid).or_default().push(ti as u32);
        }
    }

    let mut engine = Engine::new(mesh);
    engine.trace = trace;
    let mut retrieved = vec![false; targets.len()];
    let mut hits = Vec::with_capacity(k.min(targets.len()));
    let mut heuristic_ns: u128 = 0;
    let max_rule = h.max_rule();

    // Targets sharing a polygon with q are one straight segment away.
    for (ti, t) in targets.iter().enumerate() {
        if mesh.containing_polygons(*t).iter().any(|pid| q_polys.contains(pid)) {
            let dist = q.dist(*t);
            engine.push(NodeData {
                a: *t,
                b: *t,
                a_vertex: None,
                b_vertex: None,
                root: Root { point: q, id: RootId::Query },
                g: 0.0,
                f: dist,
                edge: u32::MAX,
                next_polygon: None,
                parent: None,
                kind: NodeKind::Final { target: ti as u32, dist },
                source: NO_SOURCE,
            });
        }
    }

    for mut node in start_nodes(mesh, q, RootId::Query, NO_SOURCE, false).unwrap() {
        let t0 = Instant::now();
        let est = h.estimate(node.edge, node.root.point, node.a, node.b);
        heuristic_ns += t0.elapsed().as_nanos();
        node.f = if est.is_finite() {
            node.g + est
        } else if max_rule {
            // A start node with no estimate inherits the zero node's bound.
            0.0
        } else {
            f64::INFINITY
        };
        engine.push(node);
    }

    while let Some(idx) = engine.pop() {
        let node = engine.arena[idx as usize].clone();
        if let NodeKind::Final { target, dist } = node.kind {
            if retrieved[target as usize] {
                continue;
            }
            retrieved[target as usize] = true;
            h.retired(target);
            hits.push((target, dist));
            if hits.len() == k {
                break;
            }
            continue;
        }
        if engine.stale(&node) {
            continue;
        }
        engine.record_root(&node);

        if let Some(ts) = node.next_polygon.and_then(|pid| poly_targets.get(&pid)) {
            for &ti in ts {
                if retrieved[ti as usize] {
                    continue;
                }
                let dist = node.g + h_p(node.root.point, node.a, node.b, targets[ti as usize]);
                let f = if max_rule { dist.max(node.f) } else { dist };
                engine.push(NodeData {
                    a: targets[ti as usize],
                    b: targets[ti as usize],
                    a_vertex: None,
                    b_vertex: None,
                    root: node.root,
                    g: node.g,
                    f,
                    edge: u32::MAX,
                    next_polygon: None,
                    parent: Some(idx),
                    kind: NodeKind::Final { target: ti, dist },
                    source: NO_SOURCE,
                });
            }
        }

        for s in successors(mesh, &node, false) {
            if !s.observable && engine.prune_root(s.root.id, s.g) {
                continue;
            }
            let t0 = Instant::now();
            let est = h.estimate(s.edge, s.root.point, s.a, s.b);
            heuristic_ns += t0.elapsed().as_nanos();
            let f = if est.is_finite() {
                let raw = s.g + est;
                if max_rule {
                    raw.max(node.f)
                } else {
                    raw
                }
            } else if max_rule {
                // No estimate for this node: inherit the parent's bound
                // rather than pushing it behind everything finite.
                node.f
            } else {
                f64::INFINITY
            };
            engine.push(NodeData {
                a: s.a,
                b: s.b,
                a_vertex: s.a_vertex,
                b_vertex: s.b_vertex,
                root: s.root,
                g: s.g,
                f,
                edge: s.edge,
                next_polygon: s.next_polygon,
                parent: Some(idx),
                kind: NodeKind::Interval,
                source: NO_SOURCE,
            });
        }
    }

    let truncated = hits.len() < k;
    let mut stats = std::mem::take(&mut engine.stats);
    stats.heuristic_us = (heuristic_ns / 1_000) as u64;
    Ok(KnnResult { hits, truncated, stats })
}

/// k-NN ordered by the interval heuristic.
pub fn knn_interval(
    mesh: &Mesh,
    q: Point,
    targets: &[Point],
    k: usize,
    trace: bool,
) -> Result<KnnResult, QueryError> {
    knn_search(mesh, q, targets, k, &mut IntervalHeuristic, trace)
}

/// k-NN ordered by the nearest-unretrieved-target heuristic. Returns the
/// number of estimator evaluations double-checked exhaustively when
/// `verify_exhaustive` is set.
pub fn knn_target_aware(
    mesh: &Mesh,
    q: Point,
    targets: &[Point],
    k: usize,
    verify_exhaustive: bool,
    trace: bool,
) -> Result<(KnnResult, u64), QueryError> {
    let mut tracker = TargetTracker::new(targets);
    tracker.verify_exhaustive = verify_exhaustive;
    let mut h = TargetAwareHeuristic { tracker };
    let result = knn_search(mesh, q, targets, k, &mut h, trace)?;
    Ok((result, h.tracker.verified_evals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navmesh::{triangulate, Scene};
    use crate::oracle;
    use crate::scenario;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn assert_hits_match_oracle(scene: &Scene, got: &KnnResult, q: Point, k: usize) {
        let expected = oracle::oracle_knn(scene, q, k);
        assert_eq!(
            got.hits.len(),
            expected.len(),
            "q={q:?} k={k}: {:?} vs oracle {:?}",
            got.hits,
            expected
        );
        for ((gi, gd), (ei, ed)) in got.hits.iter().zip(&expected) {
            assert_eq!(*gi as usize, *ei, "q={q:?} k={k}: ids {:?} vs {:?}", got.hits, expected);
            assert!((gd - ed).abs() <= 1e-9 * ed.max(1.0), "q={q:?}: {gd} vs oracle {ed}");
        }
    }

    #[test]
    fn open_field_matches_euclidean_order() {
        let targets = vec![p(5.0, 0.0), p(-1.0, 1.0), p(3.0, 3.0), p(0.0, -6.0)];
        let scene = Scene::new(
            (p(-10.0, -10.0), p(10.0, 10.0)),
            Vec::new(),
            targets.clone(),
        )
        .unwrap();
        let mesh = triangulate(&scene).unwrap();
        let q = p(0.2, 0.1);
        let result = knn_interval(&mesh, q, &targets, 3, false).unwrap();
        let mut by_euclid: Vec<(u32, f64)> =
            targets.iter().enumerate().map(|(i, t)| (i as u32, q.dist(*t))).collect();
        by_euclid.sort_by(|x, y| x.1.total_cmp(&y.1));
        assert_eq!(result.hits.len(), 3);
        assert!(!result.truncated);
        for (got, want) in result.hits.iter().zip(&by_euclid) {
            assert_eq!(got.0, want.0);
            assert!((got.1 - want.1).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let scene = Scene::new((p(-10.0, -10.0), p(10.0, 10.0)), Vec::new(), Vec::new()).unwrap();
        let mesh = triangulate(&scene).unwrap();
        assert_eq!(
            knn_interval(&mesh, p(0.0, 0.0), &[p(1.0, 1.0)], 0, false).unwrap_err(),
            QueryError::ZeroK
        );
        assert_eq!(
            knn_interval(&mesh, p(0.0, 0.0), &[], 1, false).unwrap_err(),
            QueryError::NoTargets
        );
    }

    #[test]
    fn unreachable_targets_truncate() {
        // One target walled off inside a sealed room, one in the open.
        let scene = Scene::new(
            (p(-10.0, -10.0), p(10.0, 10.0)),
            vec![
                vec![p(-3.0, -3.0), p(3.0, -3.0), p(3.0, -2.0), p(-3.0, -2.0)],
                vec![p(-3.0, 2.0), p(3.0, 2.0), p(3.0, 3.0), p(-3.0, 3.0)],
                vec![p(-3.0, -2.0), p(-2.0, -2.0), p(-2.0, 2.0), p(-3.0, 2.0)],
                vec![p(2.0, -2.0), p(3.0, -2.0), p(3.0, 2.0), p(2.0, 2.0)],
            ],
            vec![p(0.0, 0.0), p(-8.0, 2.0)],
        )
        .unwrap();
        let mesh = triangulate(&scene).unwrap();
        let targets = scene.targets.clone();
        let result = knn_interval(&mesh, p(-8.0, 0.0), &targets, 2, false).unwrap();
        assert_eq!(result.hits.len(), 1);
        assert_eq!(result.hits[0].0, 1);
        assert!(result.truncated);
    }

    #[test]
    fn pocket_scene_nearest_is_not_the_euclidean_one() {
        let scene = scenario::pocket_scene();
        let mesh = triangulate(&scene).unwrap();
        let targets = scene.targets.clone();
        let q = scenario::POCKET_QUERY;
        // D (index 3) is Euclidean-closest but obstructed; A (index 0) wins.
        let euclid_best = targets
            .iter()
            .enumerate()
            .min_by(|x, y| q.dist(*x.1).total_cmp(&q.dist(*y.1)))
            .unwrap()
            .0;
        assert_eq!(euclid_best, 3);
        let result = knn_interval(&mesh, q, &targets, 1, false).unwrap();
        assert_eq!(result.hits[0].0, 0);
        assert_hits_match_oracle(&scene, &result, q, 1);
    }

    #[test]
    fn interval_heuristic_matches_oracle_on_random_scenes() {
        for seed in 0..10 {
            let scene = scenario::random_scene(seed);
            let mesh = triangulate(&scene).unwrap();
            let targets = scene.targets.clone();
            for q in scenario::random_query_points(&scene, 4, seed ^ 0xbeef) {
                for k in [1, 3, 5] {
                    let result = knn_interval(&mesh, q, &targets, k, false).unwrap();
                    assert_hits_match_oracle(&scene, &result, q, k);
                    for w in result.hits.windows(2) {
                        assert!(w[0].1 <= w[1].1 + 1e-12, "retrieval out of order");
                    }
                }
            }
        }
    }

    #[test]
    fn target_aware_matches_oracle_and_interval() {
        for seed in 0..6 {
            let scene = scenario::random_scene(seed);
            let mesh = triangulate(&scene).unwrap();
            let targets = scene.targets.clone();
            for q in scenario::random_query_points(&scene, 3, seed ^ 0xfeed) {
                for k in [1, 5] {
                    let (result, checked) =
                        knn_target_aware(&mesh, q, &targets, k, true, false).unwrap();
                    assert_hits_match_oracle(&scene, &result, q, k);
                    assert!(checked > 0 || result.stats.generated == 0);
                }
            }
        }
    }

    #[test]
    fn same_polygon_targets_cost_no_expansions_beyond_finals() {
        let targets = vec![p(0.5, 0.3), p(0.2, -0.4)];
        let scene =
            Scene::new((p(-10.0, -10.0), p(10.0, 10.0)), Vec::new(), targets.clone()).unwrap();
        let mesh = triangulate(&scene).unwrap();
        let result = knn_interval(&mesh, p(0.4, -0.1), &targets, 2, false).unwrap();
        assert_eq!(result.hits.len(), 2);
        // Both targets share the query's polygon: the answer needs no more
        // pops than the two target nodes themselves plus whatever start
        // intervals sort ahead of them.
        assert!(result.stats.expansions <= 2 + result.stats.generated);
    }
}

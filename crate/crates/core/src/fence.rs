//! Offline fence labels. A flood from every target leaves, on each mesh
//! edge it crosses, a short list of path summaries (root, interval, distance
//! back to the source target). At query time the labels around the query's
//! polygon answer 1-NN almost directly, and a label-driven estimate orders
//! the full k-NN search.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{Point, Segment, EPS_ORIENT};
use crate::heuristics::{h_p, h_v};
use crate::knn::{knn_search, KnnResult, NodeHeuristic};
use crate::navmesh::Mesh;
use crate::search::{
    point_to_point_full, start_nodes, successors, Engine, NodeData, NodeKind, QueryError, RootId,
    SearchStats,
};

pub const FENCE_FORMAT_VERSION: u32 = 1;

/// One surviving flood node: a path of length `g_p` from `source` to `root`,
/// whose continuation crosses this edge somewhere on `interval`.
#[derive(Clone, Debug)]
pub struct FenceLabel {
    pub root: Point,
    pub interval: Segment,
    pub g_p: f64,
    pub minmax: f64,
    pub source: u32,
}

impl FenceLabel {
    /// Cheapest possible cost from the root to any point of the interval.
    pub fn mindist(&self) -> f64 {
        h_v(self.root, self.interval.a, self.interval.b)
    }
}

#[derive(Clone, Debug)]
pub struct Fence {
    pub labels: Vec<FenceLabel>,
    /// min over labels of g_p + minmax; any node that cannot beat this
    /// before even touching the edge is blocked.
    pub upper_bound: f64,
}

impl Default for Fence {
    fn default() -> Fence {
        Fence { labels: Vec::new(), upper_bound: f64::INFINITY }
    }
}

#[derive(Clone, Debug, Default)]
pub struct BuildStats {
    pub expansions: usize,
    pub generated: usize,
    pub blocked: usize,
    pub dominated_removed: usize,
    pub labels_stored: usize,
    pub skipped_targets: usize,
}

/// Every edge's fence (empty for edges the flood never reached), plus the
/// hashes of the inputs it was built from.
pub struct FenceStore {
    pub fences: Vec<Fence>,
    pub mesh_hash: [u8; 16],
    pub target_hash: [u8; 16],
    pub build: BuildStats,
}

/// Cheapest cost from `root`, through interval `(i0, i1)` lying on `edge`,
/// to the nearest point of the edge, paired with the cost that provably
/// suffices to reach either side of the edge around the interval's ends.
/// The interval endpoint nearer the edge's own start pairs with it.
pub fn mindist_minmaxdist(root: Point, i0: Point, i1: Point, edge: Segment) -> (f64, f64) {
    let (ia, ib) =
        if edge.param_of(i0) <= edge.param_of(i1) { (i0, i1) } else { (i1, i0) };
    let mindist = h_v(root, ia, ib);
    let minmax = (root.dist(ia) + ia.dist(edge.a)).max(root.dist(ib) + ib.dist(edge.b));
    (mindist, minmax)
}

/// Whether a label with `(g_p1, minmax1)` makes one with `(g_p2, mindist2)`
/// on the same edge redundant. Ties count as dominated.
pub fn dominates(g_p1: f64, minmax1: f64, g_p2: f64, mindist2: f64) -> bool {
    g_p1 + minmax1 <= g_p2 + mindist2
}

pub fn mesh_hash(mesh: &Mesh) -> [u8; 16] {
    let mut hasher = Sha256::new();
    hasher.update(b"mesh");
    hasher.update((mesh.vertices.len() as u64).to_le_bytes());
    for v in &mesh.vertices {
        hasher.update(v.x.to_le_bytes());
        hasher.update(v.y.to_le_bytes());
    }
    hasher.update((mesh.polygons.len() as u64).to_le_bytes());
    for poly in &mesh.polygons {
        hasher.update((poly.vertices.len() as u64).to_le_bytes());
        for &vid in &poly.vertices {
            hasher.update(vid.to_le_bytes());
        }
    }
    truncate_hash(hasher)
}

pub fn target_hash(targets: &[Point]) -> [u8; 16] {
    let mut hasher = Sha256::new();
    hasher.update(b"targets");
    hasher.update((targets.len() as u64).to_le_bytes());
    for t in targets {
        hasher.update(t.x.to_le_bytes());
        hasher.update(t.y.to_le_bytes());
    }
    truncate_hash(hasher)
}

fn truncate_hash(hasher: Sha256) -> [u8; 16] {
    let digest = hasher.finalize();
    let mut out = [0u8; 16];
    out.copy_from_slice(&digest[..16]);
    out
}

pub fn preprocess(mesh: &Mesh, targets: &[Point]) -> FenceStore {
    preprocess_with_options(mesh, targets, true)
}

/// Multi-source flood from every target, cheapest frontier first. Each popped
/// node is tested against its edge's fence: beaten by the bound, it is
/// dropped; otherwise it becomes a label (retiring any stored label it
/// dominates) and pushes on. `blocking` disables the bound test, keeping
/// only dominance sweeps: same answers downstream, more labels kept.
pub fn preprocess_with_options(mesh: &Mesh, targets: &[Point], blocking: bool) -> FenceStore {
    flood(mesh, targets, blocking, None)
}

/// A dominating/dominated pair observed during preprocessing: `winner`
/// dominates `loser` on `edge`, so `loser` was discarded. The flood pops
/// cheapest-bound first, so in practice the loser is always an arriving
/// node beaten by the stored label defining the edge's upper bound.
#[derive(Clone, Debug)]
pub struct DominationEvent {
    pub edge: u32,
    pub winner: FenceLabel,
    pub loser: FenceLabel,
}

/// Same flood as [`preprocess_with_options`], additionally returning every
/// dominating/dominated pair the bound test discarded.
pub fn preprocess_traced(
    mesh: &Mesh,
    targets: &[Point],
    blocking: bool,
) -> (FenceStore, Vec<DominationEvent>) {
    let mut events: Vec<DominationEvent> = Vec::new();
    let store = flood(mesh, targets, blocking, Some(&mut events));
    (store, events)
}

fn flood(
    mesh: &Mesh,
    targets: &[Point],
    blocking: bool,
    mut events: Option<&mut Vec<DominationEvent>>,
) -> FenceStore {
    let mut fences: Vec<Fence> = (0..mesh.edges.len()).map(|_| Fence::default()).collect();
    let mut engine = Engine::new(mesh);
    let mut build = BuildStats::default();

    for (ti, t) in targets.iter().enumerate() {
        let Some(starts) = start_nodes(mesh, *t, RootId::Target(ti as u32), ti as u32, true)
        else {
            build.skipped_targets += 1;
            continue;
        };
        for mut node in starts {
            node.f = node.g + h_v(node.root.point, node.a, node.b);
            engine.push(node);
        }
    }

    while let Some(idx) = engine.pop() {
        let node = engine.arena[idx as usize].clone();
        if engine.stale(&node) {
            continue;
        }
        let edge_seg = mesh.edge_segment(node.edge);
        let (mindist, minmax) = mindist_minmaxdist(node.root.point, node.a, node.b, edge_seg);
        let fence = &mut fences[node.edge as usize];
        if blocking && node.g + mindist >= fence.upper_bound {
            build.blocked += 1;
            if let Some(ev) = events.as_deref_mut() {
                let winner = fence
                    .labels
                    .iter()
                    .min_by(|x, y| (x.g_p + x.minmax).total_cmp(&(y.g_p + y.minmax)))
                    .expect("a finite upper bound implies a stored label");
                ev.push(DominationEvent {
                    edge: node.edge,
                    winner: winner.clone(),
                    loser: FenceLabel {
                        root: node.root.point,
                        interval: Segment::new(node.a, node.b),
                        g_p: node.g,
                        minmax,
                        source: node.source,
                    },
                });
            }
            continue;
        }
        engine.record_root(&node);

        let label = FenceLabel {
            root: node.root.point,
            interval: Segment::new(node.a, node.b),
            g_p: node.g,
            minmax,
            source: node.source,
        };
        fence.labels.retain(|old| {
            let keep = !dominates(label.g_p, label.minmax, old.g_p, old.mindist());
            if !keep {
                build.dominated_removed += 1;
                if let Some(ev) = events.as_deref_mut() {
                    ev.push(DominationEvent {
                        edge: node.edge,
                        winner: label.clone(),
                        loser: old.clone(),
                    });
                }
            }
            keep
        });
        fence.labels.push(label);
        fence.upper_bound =
            fence.labels.iter().map(|l| l.g_p + l.minmax).fold(f64::INFINITY, f64::min);

        for s in successors(mesh, &node, true) {
            if !s.observable && engine.prune_root(s.root.id, s.g) {
                continue;
            }
            engine.push(NodeData {
                a: s.a,
                b: s.b,
                a_vertex: s.a_vertex,
                b_vertex: s.b_vertex,
                root: s.root,
                g: s.g,
                f: s.g + h_v(s.root.point, s.a, s.b),
                edge: s.edge,
                next_polygon: s.next_polygon,
                parent: Some(idx),
                kind: NodeKind::Interval,
                source: node.source,
            });
        }
    }

    build.expansions = engine.stats.expansions;
    build.generated = engine.stats.generated;
    build.labels_stored = fences.iter().map(|f| f.labels.len()).sum();
    FenceStore {
        fences,
        mesh_hash: mesh_hash(mesh),
        target_hash: target_hash(targets),
        build,
    }
}

impl FenceStore {
    /// Label counts of the edges that carry at least one label, ascending.
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut counts: Vec<usize> =
            self.fences.iter().map(|f| f.labels.len()).filter(|&n| n > 0).collect();
        counts.sort_unstable();
        counts
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(b"FNCE");
        buf.extend_from_slice(&FENCE_FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.mesh_hash);
        buf.extend_from_slice(&self.target_hash);
        buf.extend_from_slice(&(self.fences.len() as u64).to_le_bytes());
        for fence in &self.fences {
            buf.extend_from_slice(&(fence.labels.len() as u32).to_le_bytes());
            for l in &fence.labels {
                for v in [
                    l.root.x,
                    l.root.y,
                    l.interval.a.x,
                    l.interval.a.y,
                    l.interval.b.x,
                    l.interval.b.y,
                    l.g_p,
                    l.minmax,
                ] {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
                buf.extend_from_slice(&l.source.to_le_bytes());
            }
        }
        let mut file = fs::File::create(path)?;
        file.write_all(&buf)
    }

    /// Loads a store and proves it belongs to this mesh and target set;
    /// anything stale or malformed is refused.
    pub fn load(path: &Path, mesh: &Mesh, targets: &[Point]) -> Result<FenceStore, FenceIoError> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, at: 0 };

        if cur.take(4)? != b"FNCE" {
            return Err(FenceIoError::BadMagic);
        }
        let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        if version != FENCE_FORMAT_VERSION {
            return Err(FenceIoError::UnsupportedVersion(version));
        }
        let stored_mesh: [u8; 16] = cur.take(16)?.try_into().unwrap();
        let stored_targets: [u8; 16] = cur.take(16)?.try_into().unwrap();
        if stored_mesh != mesh_hash(mesh) {
            return Err(FenceIoError::MeshMismatch);
        }
        if stored_targets != target_hash(targets) {
            return Err(FenceIoError::TargetMismatch);
        }

        let edge_count = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
        if edge_count != mesh.edges.len() {
            return Err(FenceIoError::MeshMismatch);
        }
        let mut fences = Vec::with_capacity(edge_count);
        for _ in 0..edge_count {
            let label_count = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
            let mut labels = Vec::with_capacity(label_count as usize);
            for _ in 0..label_count {
                let mut vals = [0.0f64; 8];
                for v in &mut vals {
                    *v = f64::from_le_bytes(cur.take(8)?.try_into().unwrap());
                }
                let source = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
                labels.push(FenceLabel {
                    root: Point::new(vals[0], vals[1]),
                    interval: Segment::new(
                        Point::new(vals[2], vals[3]),
                        Point::new(vals[4], vals[5]),
                    ),
                    g_p: vals[6],
                    minmax: vals[7],
                    source,
                });
            }
            let upper_bound =
                labels.iter().map(|l| l.g_p + l.minmax).fold(f64::INFINITY, f64::min);
            fences.push(Fence { labels, upper_bound });
        }
        if cur.at != bytes.len() {
            return Err(FenceIoError::TrailingData);
        }
        Ok(FenceStore {
            fences,
            mesh_hash: stored_mesh,
            target_hash: stored_targets,
            build: BuildStats::default(),
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FenceIoError> {
        if self.at + n > self.bytes.len() {
            return Err(FenceIoError::Truncated);
        }
        let out = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }
}

#[derive(Debug, Error)]
pub enum FenceIoError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("not a fence store file")]
    BadMagic,
    #[error("unsupported fence store version {0}")]
    UnsupportedVersion(u32),
    #[error("fence store was built for a different mesh")]
    MeshMismatch,
    #[error("fence store was built for a different target set")]
    TargetMismatch,
    #[error("fence store file is truncated")]
    Truncated,
    #[error("fence store file has trailing bytes")]
    TrailingData,
}

/// True only when the straight segment between the points provably stays on
/// the mesh: walks the polygons the segment crosses, portal by portal.
/// Bails out (false) on any grazing ambiguity; callers fall back to a
/// full search, so a refused shortcut costs time, never correctness.
fn covisible(mesh: &Mesh, from: Point, to: Point) -> bool {
    let start_polys = mesh.containing_polygons(from);
    'outer: for &start in &start_polys {
        let mut cur = start;
        let mut prev_edge = u32::MAX;
        for _ in 0..=mesh.polygons.len() {
            if mesh.point_in_polygon(cur, to) {
                return true;
            }
            let poly = &mesh.polygons[cur as usize];
            let m = poly.vertices.len();
            let mut exit: Option<(u32, Option<u32>)> = None;
            for i in 0..m {
                if poly.edges[i] == prev_edge {
                    continue;
                }
                let vs = mesh.vertex(poly.vertices[i]);
                let ve = mesh.vertex(poly.vertices[(i + 1) % m]);
                let d1 = (to - from).cross(vs - from);
                let d2 = (to - from).cross(ve - from);
                let d3 = (ve - vs).cross(from - vs);
                let d4 = (ve - vs).cross(to - vs);
                let strict = |x: f64, y: f64| {
                    (x > EPS_ORIENT && y < -EPS_ORIENT) || (x < -EPS_ORIENT && y > EPS_ORIENT)
                };
                if strict(d1, d2) && strict(d3, d4) {
                    if exit.is_some() {
                        continue 'outer;
                    }
                    exit = Some((poly.edges[i], poly.neighbors[i]));
                }
            }
            match exit {
                Some((edge, Some(next))) => {
                    prev_edge = edge;
                    cur = next;
                }
                _ => continue 'outer,
            }
        }
    }
    false
}

#[derive(Clone, Debug)]
pub struct FenceCheck {
    pub target: u32,
    pub distance: f64,
    /// Labels examined across the surrounding fences.
    pub labels_touched: usize,
    pub stats: SearchStats,
}

/// 1-NN straight off the fences surrounding the query's polygon: each label
/// promises a path of its g_p beyond its root, so the answer is the label
/// minimizing (distance to root) + g_p. Roots visible along a straight
/// segment cost d_e; the rest get a point-to-point search. Empty
/// surroundings mean no target is reachable at all.
pub fn fence_check_nn(
    mesh: &Mesh,
    store: &FenceStore,
    q: Point,
) -> Result<Option<FenceCheck>, QueryError> {
    let q_polys = mesh.containing_polygons(q);
    if q_polys.is_empty() {
        return Err(QueryError::QueryNotTraversable { x: q.x, y: q.y });
    }

    let mut edges: Vec<u32> = Vec::new();
    for &pid in &q_polys {
        for &e in &mesh.polygons[pid as usize].edges {
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
    }

    let mut stats = SearchStats::default();
    let mut root_dist: HashMap<(u64, u64), Option<f64>> = HashMap::new();
    let mut labels_touched = 0;
    let mut best: Option<(u32, f64)> = None;

    for &e in &edges {
        for label in &store.fences[e as usize].labels {
            labels_touched += 1;
            let key = (label.root.x.to_bits(), label.root.y.to_bits());
            let d_root = match root_dist.get(&key) {
                Some(d) => *d,
                None => {
                    let d = if covisible(mesh, q, label.root) {
                        Some(q.dist(label.root))
                    } else {
                        let (found, search_stats) =
                            point_to_point_full(mesh, q, label.root, false)?;
                        stats.absorb(&search_stats);
                        found.map(|(dist, _)| dist)
                    };
                    root_dist.insert(key, d);
                    d
                }
            };
            let Some(d) = d_root else { continue };
            let cost = d + label.g_p;
            let better = match best {
                None => true,
                Some((bt, bd)) => {
                    cost < bd || (cost == bd && label.source < bt)
                }
            };
            if better {
                best = Some((label.source, cost));
            }
        }
    }

    Ok(best.map(|(target, distance)| FenceCheck { target, distance, labels_touched, stats }))
}

/// Estimate from the labels on the node's own edge: the cheapest
/// continuation any label promises. No labels, no information. Can shrink
/// along a chain when a hidden label's root looks close from further in, so
/// searches ordered by it alone must tolerate reopening.
fn label_estimate(store: &FenceStore, edge: u32, root: Point, a: Point, b: Point) -> f64 {
    let mut best = f64::INFINITY;
    for l in &store.fences[edge as usize].labels {
        best = best.min(h_p(root, a, b, l.root) + l.g_p);
    }
    best
}

/// Label estimate under the parent-max rule: f never decreases.
pub struct FenceHeuristic<'s> {
    pub store: &'s FenceStore,
}

impl NodeHeuristic for FenceHeuristic<'_> {
    fn estimate(&mut self, edge: u32, root: Point, a: Point, b: Point) -> f64 {
        label_estimate(self.store, edge, root, a, b)
    }
    fn max_rule(&self) -> bool {
        true
    }
}

/// The raw label estimate with no parent clamp. Still never overestimates,
/// so answers stay correct through reopening; exists to demonstrate the
/// f-order instability the max rule repairs.
pub struct NaiveFenceHeuristic<'s> {
    pub store: &'s FenceStore,
}

impl NodeHeuristic for NaiveFenceHeuristic<'_> {
    fn estimate(&mut self, edge: u32, root: Point, a: Point, b: Point) -> f64 {
        label_estimate(self.store, edge, root, a, b)
    }
}

/// k-NN ordered by the fence heuristic.
pub fn knn_fence(
    mesh: &Mesh,
    store: &FenceStore,
    q: Point,
    targets: &[Point],
    k: usize,
    trace: bool,
) -> Result<KnnResult, QueryError> {
    knn_search(mesh, q, targets, k, &mut FenceHeuristic { store }, trace)
}

pub fn knn_fence_naive(
    mesh: &Mesh,
    store: &FenceStore,
    q: Point,
    targets: &[Point],
    k: usize,
    trace: bool,
) -> Result<KnnResult, QueryError> {
    knn_search(mesh, q, targets, k, &mut NaiveFenceHeuristic { store }, trace)
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

    #[test]
    fn mindist_minmaxdist_fixed_cases() {
        let edge = Segment::new(p(0.0, 2.0), p(4.0, 2.0));
        // Interval strictly inside the edge, root below its middle.
        let (mindist, minmax) = mindist_minmaxdist(p(2.0, 0.0), p(1.0, 2.0), p(3.0, 2.0), edge);
        assert!((mindist - 2.0).abs() < 1e-12);
        assert!((minmax - (5.0f64.sqrt() + 1.0)).abs() < 1e-12);
        // Interval endpoints given in reverse order: same answer.
        let (md2, mm2) = mindist_minmaxdist(p(2.0, 0.0), p(3.0, 2.0), p(1.0, 2.0), edge);
        assert_eq!(mindist, md2);
        assert_eq!(minmax, mm2);
        // Interval spanning the whole edge: endpoint gaps vanish.
        let r = p(0.5, -1.0);
        let (_, mm3) = mindist_minmaxdist(r, p(0.0, 2.0), p(4.0, 2.0), edge);
        assert!((mm3 - r.dist(p(4.0, 2.0)).max(r.dist(p(0.0, 2.0)))).abs() < 1e-12);
        // Point interval sitting on the edge's start, root on it too.
        let (md4, mm4) = mindist_minmaxdist(p(0.0, 2.0), p(0.0, 2.0), p(0.0, 2.0), edge);
        assert_eq!(md4, 0.0);
        assert!((mm4 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn dominance_is_the_stated_inequality() {
        assert!(dominates(1.0, 3.0, 2.0, 2.5)); // 4 <= 4.5
        assert!(dominates(1.0, 3.0, 2.0, 2.0)); // 4 <= 4, ties dominate
        assert!(!dominates(2.0, 3.0, 1.0, 2.0)); // 5 > 3
    }

    #[test]
    fn single_target_open_square_labels_every_edge_once() {
        let scene = Scene::new(
            (p(0.0, 0.0), p(10.0, 10.0)),
            Vec::new(),
            vec![p(1.0, 2.0)],
        )
        .unwrap();
        let mesh = triangulate(&scene).unwrap();
        let store = preprocess(&mesh, &scene.targets);
        for (e, fence) in store.fences.iter().enumerate() {
            assert_eq!(fence.labels.len(), 1, "edge {e}");
            assert_eq!(fence.labels[0].source, 0);
            let l = &fence.labels[0];
            assert!((fence.upper_bound - (l.g_p + l.minmax)).abs() < 1e-12);
        }
    }

    #[test]
    fn split_scene_keeps_only_the_near_side_labels() {
        // A wall across the middle with a gap at the top; one target on
        // each side, far from the gap.
        let scene = Scene::new(
            (p(-10.0, -10.0), p(10.0, 10.0)),
            vec![vec![p(-0.3, -10.0), p(0.3, -10.0), p(0.3, 7.0), p(-0.3, 7.0)]],
            vec![p(-7.0, -5.0), p(7.0, -5.0)],
        )
        .unwrap();
        let mesh = triangulate(&scene).unwrap();
        let store = preprocess(&mesh, &scene.targets);

        for (e, fence) in store.fences.iter().enumerate() {
            if fence.labels.is_empty() {
                continue;
            }
            let seg = mesh.edge_segment(e as u32);
            let far_left = seg.a.x < -3.0 && seg.b.x < -3.0 && seg.a.y < 3.0 && seg.b.y < 3.0;
            let far_right = seg.a.x > 3.0 && seg.b.x > 3.0 && seg.a.y < 3.0 && seg.b.y < 3.0;
            for l in &fence.labels {
                if far_left {
                    assert_eq!(l.source, 0, "edge {e} deep in the left half");
                }
                if far_right {
                    assert_eq!(l.source, 1, "edge {e} deep in the right half");
                }
            }

            // The labels reconstruct the true nearest-target distance at
            // the edge midpoint wherever the midpoint can see its label
            // roots' region (sampled loosely through the oracle).
            let mid = seg.a.lerp(seg.b, 0.5);
            let via_labels = fence
                .labels
                .iter()
                .filter_map(|l| {
                    oracle::oracle_distance(&scene, mid, l.root).map(|d| d + l.g_p)
                })
                .fold(f64::INFINITY, f64::min);
            let direct = scene
                .targets
                .iter()
                .filter_map(|t| oracle::oracle_distance(&scene, mid, *t))
                .fold(f64::INFINITY, f64::min);
            if via_labels.is_finite() && direct.is_finite() {
                assert!(
                    via_labels >= direct - 1e-9,
                    "edge {e}: labels undercut the true distance"
                );
            }
        }
    }

    #[test]
    fn stored_labels_never_dominate_each_other() {
        for seed in [3, 17, 29] {
            let scene = scenario::random_scene(seed);
            let mesh = triangulate(&scene).unwrap();
            let store = preprocess(&mesh, &scene.targets);
            for (e, fence) in store.fences.iter().enumerate() {
                let recomputed = fence
                    .labels
                    .iter()
                    .map(|l| l.g_p + l.minmax)
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(fence.upper_bound, recomputed, "edge {e} bound out of date");
                for (i, l1) in fence.labels.iter().enumerate() {
                    for (j, l2) in fence.labels.iter().enumerate() {
                        if i != j {
                            assert!(
                                !dominates(l1.g_p, l1.minmax, l2.g_p, l2.mindist()),
                                "seed {seed} edge {e}: label {i} dominates {j}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn fence_check_matches_oracle_one_nn() {
        for seed in 40..46 {
            let scene = scenario::random_scene(seed);
            let mesh = triangulate(&scene).unwrap();
            let store = preprocess(&mesh, &scene.targets);
            for q in scenario::random_query_points(&scene, 4, seed ^ 0x7a7a) {
                let got = fence_check_nn(&mesh, &store, q).unwrap();
                let expected = oracle::oracle_knn(&scene, q, 1);
                match (&got, expected.first()) {
                    (Some(check), Some(&(id, dist))) => {
                        assert_eq!(check.target as usize, id, "seed {seed} q={q:?}");
                        assert!(
                            (check.distance - dist).abs() <= 1e-9 * dist.max(1.0),
                            "seed {seed} q={q:?}: {} vs {dist}",
                            check.distance
                        );
                    }
                    (None, None) => {}
                    _ => panic!("seed {seed} q={q:?}: {got:?} vs {expected:?}"),
                }
            }
        }
    }

    #[test]
    fn walled_off_query_returns_nothing() {
        let scene = Scene::new(
            (p(-10.0, -10.0), p(10.0, 10.0)),
            vec![
                vec![p(-3.0, -3.0), p(3.0, -3.0), p(3.0, -2.0), p(-3.0, -2.0)],
                vec![p(-3.0, 2.0), p(3.0, 2.0), p(3.0, 3.0), p(-3.0, 3.0)],
                vec![p(-3.0, -2.0), p(-2.0, -2.0), p(-2.0, 2.0), p(-3.0, 2.0)],
                vec![p(2.0, -2.0), p(3.0, -2.0), p(3.0, 2.0), p(2.0, 2.0)],
            ],
            vec![p(-8.0, 0.0)],
        )
        .unwrap();
        let mesh = triangulate(&scene).unwrap();
        let store = preprocess(&mesh, &scene.targets);
        // The query sits inside the sealed room; no label can reach it.
        assert!(fence_check_nn(&mesh, &store, p(0.0, 0.0)).unwrap().is_none());
    }

    #[test]
    fn fence_knn_matches_oracle() {
        for seed in 50..56 {
            let scene = scenario::random_scene(seed);
            let mesh = triangulate(&scene).unwrap();
            let store = preprocess(&mesh, &scene.targets);
            for q in scenario::random_query_points(&scene, 3, seed ^ 0x1dea) {
                for k in [1, 3, 5] {
                    let result = knn_fence(&mesh, &store, q, &scene.targets, k, false).unwrap();
                    let expected = oracle::oracle_knn(&scene, q, k);
                    assert_eq!(result.hits.len(), expected.len(), "seed {seed} q={q:?} k={k}");
                    for (got, want) in result.hits.iter().zip(&expected) {
                        assert_eq!(got.0 as usize, want.0, "seed {seed} q={q:?} k={k}");
                        assert!((got.1 - want.1).abs() <= 1e-9 * want.1.max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn full_k_recovers_the_whole_sorted_list() {
        let scene = scenario::pocket_scene();
        let mesh = triangulate(&scene).unwrap();
        let store = preprocess(&mesh, &scene.targets);
        let k = scene.targets.len();
        let result =
            knn_fence(&mesh, &store, scenario::POCKET_QUERY, &scene.targets, k, false).unwrap();
        let expected = oracle::oracle_knn(&scene, scenario::POCKET_QUERY, k);
        assert_eq!(result.hits.len(), expected.len());
        for (got, want) in result.hits.iter().zip(&expected) {
            assert_eq!(got.0 as usize, want.0);
            assert!((got.1 - want.1).abs() <= 1e-9 * want.1.max(1.0));
        }
    }

    #[test]
    fn naive_estimate_still_answers_correctly() {
        for seed in [60, 61, 62] {
            let scene = scenario::random_scene(seed);
            let mesh = triangulate(&scene).unwrap();
            let store = preprocess(&mesh, &scene.targets);
            for q in scenario::random_query_points(&scene, 2, seed ^ 0xaaaa) {
                for k in [1, 3] {
                    let naive =
                        knn_fence_naive(&mesh, &store, q, &scene.targets, k, false).unwrap();
                    let expected = oracle::oracle_knn(&scene, q, k);
                    assert_eq!(naive.hits.len(), expected.len());
                    for (got, want) in naive.hits.iter().zip(&expected) {
                        assert_eq!(got.0 as usize, want.0, "seed {seed} q={q:?} k={k}");
                        assert!((got.1 - want.1).abs() <= 1e-9 * want.1.max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn trap_scene_naive_f_drops_and_max_rule_holds() {
        let scene = scenario::trap_scene();
        let mesh = triangulate(&scene).unwrap();
        let store = preprocess(&mesh, &scene.targets);
        let q = scenario::TRAP_QUERY;

        let naive = knn_fence_naive(&mesh, &store, q, &scene.targets, 1, true).unwrap();
        let drops = naive
            .stats
            .f_links
            .iter()
            .filter(|(pf, cf)| cf.is_finite() && *cf < pf - 1e-9)
            .count();
        assert!(drops > 0, "expected the naive estimate to reorder f at least once");

        let clamped = knn_fence(&mesh, &store, q, &scene.targets, 1, true).unwrap();
        for (pf, cf) in &clamped.stats.f_links {
            assert!(cf >= pf, "max rule must keep f nondecreasing exactly");
        }
        assert_eq!(naive.hits, clamped.hits);
    }

    #[test]
    fn blocking_toggle_never_changes_answers() {
        for seed in [70, 71] {
            let scene = scenario::random_scene(seed);
            let mesh = triangulate(&scene).unwrap();
            let with = preprocess_with_options(&mesh, &scene.targets, true);
            let without = preprocess_with_options(&mesh, &scene.targets, false);
            assert!(without.build.labels_stored >= with.build.labels_stored);
            for q in scenario::random_query_points(&scene, 4, seed ^ 0xb10c) {
                let a = fence_check_nn(&mesh, &with, q).unwrap();
                let b = fence_check_nn(&mesh, &without, q).unwrap();
                match (&a, &b) {
                    (Some(x), Some(y)) => {
                        assert_eq!(x.target, y.target, "seed {seed} q={q:?}");
                        assert!((x.distance - y.distance).abs() <= 1e-9 * x.distance.max(1.0));
                    }
                    (None, None) => {}
                    _ => panic!("seed {seed} q={q:?}: {a:?} vs {b:?}"),
                }
                for k in [1, 3] {
                    let x = knn_fence(&mesh, &with, q, &scene.targets, k, false).unwrap();
                    let y = knn_fence(&mesh, &without, q, &scene.targets, k, false).unwrap();
                    assert_eq!(x.hits.len(), y.hits.len());
                    for (gx, gy) in x.hits.iter().zip(&y.hits) {
                        assert_eq!(gx.0, gy.0);
                        assert!((gx.1 - gy.1).abs() <= 1e-9 * gy.1.max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn store_roundtrip_and_stale_rejection() {
        let scene = scenario::random_scene(7);
        let mesh = triangulate(&scene).unwrap();
        let store = preprocess(&mesh, &scene.targets);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.fence");
        store.save(&path).unwrap();

        let loaded = FenceStore::load(&path, &mesh, &scene.targets).unwrap();
        assert_eq!(loaded.fences.len(), store.fences.len());
        for (a, b) in loaded.fences.iter().zip(&store.fences) {
            assert_eq!(a.labels.len(), b.labels.len());
            assert_eq!(a.upper_bound, b.upper_bound);
            for (la, lb) in a.labels.iter().zip(&b.labels) {
                assert_eq!(la.root, lb.root);
                assert_eq!(la.g_p, lb.g_p);
                assert_eq!(la.minmax, lb.minmax);
                assert_eq!(la.source, lb.source);
            }
        }

        // Same mesh, different targets: refused.
        let mut other_targets = scene.targets.clone();
        other_targets.pop();
        assert!(matches!(
            FenceStore::load(&path, &mesh, &other_targets),
            Err(FenceIoError::TargetMismatch)
        ));

        // Corrupted header: refused.
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            FenceStore::load(&path, &mesh, &scene.targets),
            Err(FenceIoError::BadMagic)
        ));

        // Truncated body: refused.
        store.save(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            FenceStore::load(&path, &mesh, &scene.targets),
            Err(FenceIoError::Truncated)
        ));
    }

    #[test]
    fn equidistant_corridor_survives_and_answers() {
        let scene = scenario::corridor_scene(32);
        let mesh = triangulate(&scene).unwrap();
        let store = preprocess(&mesh, &scene.targets);
        assert!(store.build.labels_stored > 0);
        for q in scenario::random_query_points(&scene, 3, 0xc0de) {
            let got = fence_check_nn(&mesh, &store, q).unwrap();
            let expected = oracle::oracle_knn(&scene, q, 1);
            match (&got, expected.first()) {
                (Some(check), Some(&(id, dist))) => {
                    assert!(
                        (check.distance - dist).abs() <= 1e-9 * dist.max(1.0),
                        "q={q:?}: {} vs {dist}",
                        check.distance
                    );
                    let tied = (oracle::oracle_knn(&scene, q, scene.targets.len()))
                        .iter()
                        .filter(|(_, d)| (d - dist).abs() <= 1e-9 * dist.max(1.0))
                        .any(|&(i, _)| i == check.target as usize);
                    assert!(tied, "q={q:?}: {} not among tied nearest {id}", check.target);
                }
                (None, None) => {}
                _ => panic!("q={q:?}: {got:?} vs {expected:?}"),
            }
        }
    }
}

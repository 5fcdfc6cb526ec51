//! Polyanya-style interval search: node representation, observable and
//! non-observable successor generation, root pruning, the best-first engine,
//! and point-to-point queries.

use std::collections::BinaryHeap;
use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{
    closest_point_on_segment, orientation, segment_intersection, Orientation, Point, Segment,
    SegmentIntersection, EPS_GEOM, EPS_ORIENT,
};
use crate::heuristics::h_p;
use crate::navmesh::Mesh;

/// Identity of a search root, used to key the per-root best-g pruning table.
/// `Free` marks interim roots that are not mesh vertices (degenerate collinear
/// expansions); they are never recorded or pruned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RootId {
    Query,
    Target(u32),
    Vertex(u32),
    Free,
}

#[derive(Clone, Copy, Debug)]
pub struct Root {
    pub point: Point,
    pub id: RootId,
}

#[derive(Clone, Copy, Debug)]
pub enum NodeKind {
    /// An interval on a mesh edge, to be pushed into `next_polygon`.
    Interval,
    /// The target itself; popping it retrieves the target at distance `dist`.
    Final { target: u32, dist: f64 },
}

/// One search node: every point of `[a, b]` is visible from `root` within
/// the mesh, and the node's path from the search origin to `root` has length
/// `g`.
#[derive(Clone, Debug)]
pub struct NodeData {
    pub a: Point,
    pub b: Point,
    /// Mesh vertex ids when the corresponding endpoint sits on one; roots may
    /// only move to vertex endpoints.
    pub a_vertex: Option<u32>,
    pub b_vertex: Option<u32>,
    pub root: Root,
    pub g: f64,
    pub f: f64,
    /// Mesh edge carrying the interval (undefined for finals).
    pub edge: u32,
    /// Polygon the interval will be pushed into; `None` for walls and finals.
    pub next_polygon: Option<u32>,
    pub parent: Option<u32>,
    pub kind: NodeKind,
    /// Source target id during preprocessing floods; `u32::MAX` in queries.
    pub source: u32,
}

pub const NO_SOURCE: u32 = u32::MAX;

/// A successor produced by pushing an interval through its polygon:
/// geometry, resolved root, and accumulated g. The caller assigns f.
#[derive(Clone, Debug)]
pub struct Successor {
    pub a: Point,
    pub b: Point,
    pub a_vertex: Option<u32>,
    pub b_vertex: Option<u32>,
    pub edge: u32,
    pub next_polygon: Option<u32>,
    pub root: Root,
    pub g: f64,
    /// True when the root was carried over unchanged (no bend).
    pub observable: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    RootB,
    Observable,
    RootA,
}

/// Pushes the node's interval through its next polygon and splits the far
/// edges into observable pieces (seen straight from the root through the
/// interval) and non-observable pieces (requiring a taut bend at an interval
/// endpoint). Bends can only be taut at mesh vertices, so non-observable
/// pieces whose interval endpoint is mid-edge are dropped; the region they
/// would cover is reached more cheaply through a sibling interval. Wall edges
/// are skipped unless `include_walls` is set.
pub fn successors(mesh: &Mesh, node: &NodeData, include_walls: bool) -> Vec<Successor> {
    let Some(poly_id) = node.next_polygon else { return Vec::new() };
    let poly = &mesh.polygons[poly_id as usize];
    let m = poly.vertices.len();
    let entry = poly
        .edges
        .iter()
        .position(|&e| e == node.edge)
        .expect("node's edge borders its next polygon");

    // Direct the entry edge along the ring so the polygon lies to its left;
    // order the interval the same way (a first).
    let u0 = mesh.vertex(poly.vertices[entry]);
    let u1 = mesh.vertex(poly.vertices[(entry + 1) % m]);
    let eseg = Segment::new(u0, u1);
    let (a, b, a_vertex, b_vertex) = if eseg.param_of(node.a) <= eseg.param_of(node.b) {
        (node.a, node.b, node.a_vertex, node.b_vertex)
    } else {
        (node.b, node.a, node.b_vertex, node.a_vertex)
    };
    let r = node.root.point;

    let mut out: Vec<Successor> = Vec::new();
    let emit =
        |ring_pos: usize, t0: f64, t1: f64, side: Side, out: &mut Vec<Successor>| {
            let far_next = poly.neighbors[ring_pos];
            if far_next.is_none() && !include_walls {
                return;
            }
            let vs_id = poly.vertices[ring_pos];
            let ve_id = poly.vertices[(ring_pos + 1) % m];
            let vs = mesh.vertex(vs_id);
            let ve = mesh.vertex(ve_id);
            let len = vs.dist(ve);
            if len <= EPS_GEOM {
                return;
            }
            let eps_t = EPS_GEOM / len;

            let snap = |t: f64| -> (Point, Option<u32>) {
                if t <= eps_t {
                    (vs, Some(vs_id))
                } else if t >= 1.0 - eps_t {
                    (ve, Some(ve_id))
                } else {
                    (vs.lerp(ve, t), None)
                }
            };
            let (p0, p0v) = snap(t0);
            let (p1, p1v) = snap(t1);
            if t1 - t0 < eps_t {
                // A collapsed piece survives only as an observable
                // point-interval pinned to a vertex genuinely inside the
                // viewing cone (between its boundary rays, up to geometric
                // tolerance): the cone squeezed onto a doorway corner.
                if side != Side::Observable || p0v.is_none() || p0v != p1v {
                    return;
                }
                let w = p0;
                let in_a = (a - r).cross(w - r) <= EPS_GEOM * r.dist(a);
                let in_b = (b - r).cross(w - r) >= -EPS_GEOM * r.dist(b);
                if !(in_a && in_b) {
                    return;
                }
            }
            let (root, g, observable) = match side {
                Side::Observable => (node.root, node.g, true),
                Side::RootB => {
                    let Some(bv) = b_vertex else { return };
                    (Root { point: b, id: RootId::Vertex(bv) }, node.g + r.dist(b), false)
                }
                Side::RootA => {
                    let Some(av) = a_vertex else { return };
                    (Root { point: a, id: RootId::Vertex(av) }, node.g + r.dist(a), false)
                }
            };
            out.push(Successor {
                a: p0,
                b: p1,
                a_vertex: p0v,
                b_vertex: p1v,
                edge: poly.edges[ring_pos],
                next_polygon: far_next,
                root,
                g,
                observable,
            });
        };

    // Degenerate viewing cone: the root is collinear with the interval (or
    // the interval is a single point). Either the root lies on the interval
    // and sees the whole polygon, or every continuation funnels through the
    // nearer interval endpoint; the bend there costs nothing extra because
    // the approach runs along the interval's own line.
    let point_interval = a.close_to(b, EPS_GEOM);
    if point_interval || orientation(r, a, b) == Orientation::Collinear {
        let on_interval = if point_interval {
            r.close_to(a, EPS_GEOM) || r.close_to(b, EPS_GEOM)
        } else {
            closest_point_on_segment(r, Segment::new(a, b)).1 <= EPS_GEOM
        };
        if on_interval {
            for j in 1..m {
                emit((entry + j) % m, 0.0, 1.0, Side::Observable, &mut out);
            }
            return out;
        }
        let (n, n_vertex) = if point_interval || r.dist(a) <= r.dist(b) {
            (a, a_vertex)
        } else {
            (b, b_vertex)
        };
        for j in 1..m {
            let ring_pos = (entry + j) % m;
            let far_next = poly.neighbors[ring_pos];
            if far_next.is_none() && !include_walls {
                continue;
            }
            let vs_id = poly.vertices[ring_pos];
            let ve_id = poly.vertices[(ring_pos + 1) % m];
            out.push(Successor {
                a: mesh.vertex(vs_id),
                b: mesh.vertex(ve_id),
                a_vertex: Some(vs_id),
                b_vertex: Some(ve_id),
                edge: poly.edges[ring_pos],
                next_polygon: far_next,
                root: Root { point: n, id: n_vertex.map_or(RootId::Free, RootId::Vertex) },
                g: node.g + r.dist(n),
                observable: false,
            });
        }
        return out;
    }

    // General cone. A far-edge point w is observable exactly when it lies on
    // the in-side of both boundary rays: cross(b-r, w-r) >= 0 (not right of
    // the ray through b) and cross(a-r, w-r) <= 0 (not left of the ray
    // through a). Each condition fails on a single sub-interval of the edge,
    // attached to one of its ends; those sub-intervals become the bend
    // pieces, and whatever survives both is the observable piece. The failing
    // region can sit at either end: a polygon turning back around a doorway
    // corner puts it at the far end even though the edge starts on the ray.
    for j in 1..m {
        let ring_pos = (entry + j) % m;
        let vs = mesh.vertex(poly.vertices[ring_pos]);
        let ve = mesh.vertex(poly.vertices[(ring_pos + 1) % m]);
        let fb0 = (b - r).cross(vs - r);
        let fb1 = (b - r).cross(ve - r);
        let fa0 = (a - r).cross(vs - r);
        let fa1 = (a - r).cross(ve - r);

        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        for (side, v0, v1) in [(Side::RootB, fb0, fb1), (Side::RootA, -fa0, -fa1)] {
            match exclusion(v0, v1) {
                Excl::None => {}
                Excl::Start(z) => {
                    emit(ring_pos, 0.0, z, side, &mut out);
                    lo = lo.max(z);
                }
                Excl::End(z) => {
                    emit(ring_pos, z, 1.0, side, &mut out);
                    hi = hi.min(z);
                }
                Excl::All => {
                    emit(ring_pos, 0.0, 1.0, side, &mut out);
                    lo = 1.0;
                    hi = 0.0;
                }
            }
        }
        if hi >= lo {
            emit(ring_pos, lo, hi, Side::Observable, &mut out);
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Excl {
    None,
    Start(f64),
    End(f64),
    All,
}

/// Where a linear function over `[0, 1]` with endpoint values `v0`, `v1` is
/// negative: nowhere, an interval hanging off one end, or everywhere.
/// Endpoint values within the orientation tolerance count as non-negative, so
/// a piece grazing a boundary ray keeps its touching point.
fn exclusion(v0: f64, v1: f64) -> Excl {
    if v0 < -EPS_ORIENT {
        if v1 >= -EPS_ORIENT {
            Excl::Start(if v1 > EPS_ORIENT { v0 / (v0 - v1) } else { 1.0 })
        } else {
            Excl::All
        }
    } else if v1 < -EPS_ORIENT {
        Excl::End(if v0 > EPS_ORIENT { v0 / (v0 - v1) } else { 0.0 })
    } else {
        Excl::None
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    f: f64,
    g: f64,
    idx: u32,
}

impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // BinaryHeap is a max-heap; "greatest" must mean "expand first":
    // smallest f, then largest g, then insertion order.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.idx.cmp(&self.idx))
    }
}

#[derive(Clone, Debug, Default)]
pub struct SearchStats {
    pub expansions: usize,
    pub generated: usize,
    pub heuristic_us: u64,
    /// f of every expanded node, in pop order (only when tracing).
    pub popped_f: Vec<f64>,
    /// (parent f, child f) for every generated node (only when tracing).
    pub f_links: Vec<(f64, f64)>,
}

impl SearchStats {
    /// Folds another search's counters (and any traces) into this one.
    pub fn absorb(&mut self, other: &SearchStats) {
        self.expansions += other.expansions;
        self.generated += other.generated;
        self.heuristic_us += other.heuristic_us;
        self.popped_f.extend_from_slice(&other.popped_f);
        self.f_links.extend_from_slice(&other.f_links);
    }
}

/// Shared best-first machinery: node arena, open list, per-root best-g table.
pub struct Engine<'m> {
    pub mesh: &'m Mesh,
    pub arena: Vec<NodeData>,
    heap: BinaryHeap<HeapEntry>,
    best_g: HashMap<RootId, f64>,
    pub stats: SearchStats,
    pub trace: bool,
}

impl<'m> Engine<'m> {
    pub fn new(mesh: &'m Mesh) -> Engine<'m> {
        Engine {
            mesh,
            arena: Vec::new(),
            heap: BinaryHeap::new(),
            best_g: HashMap::new(),
            stats: SearchStats::default(),
            trace: false,
        }
    }

    pub fn push(&mut self, node: NodeData) -> u32 {
        let idx = self.arena.len() as u32;
        if self.trace {
            let parent_f = node.parent.map_or(0.0, |p| self.arena[p as usize].f);
            self.stats.f_links.push((parent_f, node.f));
        }
        self.heap.push(HeapEntry { f: node.f, g: node.g, idx });
        self.arena.push(node);
        self.stats.generated += 1;
        idx
    }

    pub fn pop(&mut self) -> Option<u32> {
        let entry = self.heap.pop()?;
        self.stats.expansions += 1;
        if self.trace {
            self.stats.popped_f.push(entry.f);
        }
        Some(entry.idx)
    }

    /// True when a node with this root was already expanded at an equal or
    /// better g: the candidate cannot improve any path and is discarded.
    /// Applied only when a successor's root moved (a taut bend).
    pub fn prune_root(&self, id: RootId, g: f64) -> bool {
        match id {
            RootId::Free => false,
            _ => self.best_g.get(&id).is_some_and(|&best| best <= g),
        }
    }

    /// Lazy counterpart at expansion time: skip nodes whose root has since
    /// been expanded at a strictly better g.
    pub fn stale(&self, node: &NodeData) -> bool {
        match node.root.id {
            RootId::Free => false,
            id => self.best_g.get(&id).is_some_and(|&best| best < node.g),
        }
    }

    pub fn record_root(&mut self, node: &NodeData) {
        if node.root.id != RootId::Free {
            let entry = self.best_g.entry(node.root.id).or_insert(f64::INFINITY);
            *entry = entry.min(node.g);
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum QueryError {
    #[error("query point ({x}, {y}) is not on the traversable mesh")]
    QueryNotTraversable { x: f64, y: f64 },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no targets supplied")]
    NoTargets,
}

/// Initial nodes for a search fanning out from `origin`: one per edge of each
/// containing polygon (both polygons when the origin sits on a shared edge),
/// deduplicated, excluding edges the origin lies on. Walls are skipped unless
/// `include_walls`.
pub fn start_nodes(
    mesh: &Mesh,
    origin: Point,
    origin_id: RootId,
    source: u32,
    include_walls: bool,
) -> Option<Vec<NodeData>> {
    let polys = mesh.containing_polygons(origin);
    if polys.is_empty() {
        return None;
    }
    let mut seen_edges = Vec::new();
    let mut out = Vec::new();
    for &pid in &polys {
        let poly = &mesh.polygons[pid as usize];
        let m = poly.vertices.len();
        for i in 0..m {
            let edge = poly.edges[i];
            if seen_edges.contains(&edge) {
                continue;
            }
            let vs = mesh.vertex(poly.vertices[i]);
            let ve = mesh.vertex(poly.vertices[(i + 1) % m]);
            // An edge the origin sits on leads to a polygon that is itself a
            // start polygon; pushing through it would re-enter.
            if closest_point_on_segment(origin, Segment::new(vs, ve)).1 <= EPS_GEOM {
                seen_edges.push(edge);
                continue;
            }
            let next = poly.neighbors[i];
            if next.is_none() && !include_walls {
                continue;
            }
            seen_edges.push(edge);
            out.push(NodeData {
                a: vs,
                b: ve,
                a_vertex: Some(poly.vertices[i]),
                b_vertex: Some(poly.vertices[(i + 1) % m]),
                root: Root { point: origin, id: origin_id },
                g: 0.0,
                f: 0.0,
                edge,
                next_polygon: next,
                parent: None,
                kind: NodeKind::Interval,
                source,
            });
        }
    }
    Some(out)
}

/// Exact shortest obstacle-avoiding path between two points on the mesh.
/// Returns `None` when `t` is unreachable (including off-mesh `t`).
pub fn point_to_point(
    mesh: &Mesh,
    q: Point,
    t: Point,
) -> Result<Option<(f64, Vec<Point>, SearchStats)>, QueryError> {
    point_to_point_traced(mesh, q, t, false)
}

pub fn point_to_point_traced(
    mesh: &Mesh,
    q: Point,
    t: Point,
    trace: bool,
) -> Result<Option<(f64, Vec<Point>, SearchStats)>, QueryError> {
    let (found, stats) = point_to_point_full(mesh, q, t, trace)?;
    Ok(found.map(|(dist, path)| (dist, path, stats)))
}

/// Like `point_to_point` but reports search effort even when the target
/// turns out unreachable (the whole reachable surface gets swept).
#[allow(clippy::type_complexity)]
pub fn point_to_point_full(
    mesh: &Mesh,
    q: Point,
    t: Point,
    trace: bool,
) -> Result<(Option<(f64, Vec<Point>)>, SearchStats), QueryError> {
    let q_polys = mesh.containing_polygons(q);
    if q_polys.is_empty() {
        return Err(QueryError::QueryNotTraversable { x: q.x, y: q.y });
    }
    let t_polys = mesh.containing_polygons(t);
    if t_polys.is_empty() {
        return Ok((None, SearchStats::default()));
    }

    let mut engine = Engine::new(mesh);
    engine.trace = trace;

    // Target in the starting polygon: straight line, no search.
    if q_polys.iter().any(|poly| t_polys.contains(poly)) {
        let d = q.dist(t);
        return Ok((Some((d, vec![q, t])), std::mem::take(&mut engine.stats)));
    }

    let starts = start_nodes(mesh, q, RootId::Query, NO_SOURCE, false).unwrap();
    for mut node in starts {
        node.f = node.g + h_p(node.root.point, node.a, node.b, t);
        engine.push(node);
    }

    while let Some(idx) = engine.pop() {
        let node = engine.arena[idx as usize].clone();
        if let NodeKind::Final { dist, .. } = node.kind {
            let path = extract_path(&engine.arena, idx, q, t);
            return Ok((Some((dist, path)), std::mem::take(&mut engine.stats)));
        }
        if engine.stale(&node) {
            continue;
        }
        engine.record_root(&node);

        if node.next_polygon.is_some_and(|poly| t_polys.contains(&poly)) {
            let dist = node.g + h_p(node.root.point, node.a, node.b, t);
            engine.push(NodeData {
                a: t,
                b: t,
                a_vertex: None,
                b_vertex: None,
                root: node.root,
                g: node.g,
                f: dist,
                edge: u32::MAX,
                next_polygon: None,
                parent: Some(idx),
                kind: NodeKind::Final { target: 0, dist },
                source: NO_SOURCE,
            });
        }

        for s in successors(mesh, &node, false) {
            if !s.observable && engine.prune_root(s.root.id, s.g) {
                continue;
            }
            let f = s.g + h_p(s.root.point, s.a, s.b, t);
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
    Ok((None, std::mem::take(&mut engine.stats)))
}

/// Rebuilds the point path of a popped final node: the query point, every
/// root in turn, a possible last bend at an interval endpoint when the
/// target is reached around a corner, then the target.
pub fn extract_path(arena: &[NodeData], final_idx: u32, q: Point, t: Point) -> Vec<Point> {
    let final_node = &arena[final_idx as usize];
    let mut bends = Vec::new();

    // The hop from the last root to t may round an interval endpoint.
    if let Some(pidx) = final_node.parent {
        let parent = &arena[pidx as usize];
        let r = parent.root.point;
        if !parent.a.close_to(parent.b, EPS_GEOM) {
            let seg = Segment::new(parent.a, parent.b);
            if matches!(segment_intersection(Segment::new(r, t), seg), SegmentIntersection::None) {
                let via_a = r.dist(parent.a) + parent.a.dist(t);
                let via_b = r.dist(parent.b) + parent.b.dist(t);
                bends.push(if via_a <= via_b { parent.a } else { parent.b });
            }
        } else if !r.close_to(parent.a, EPS_GEOM) {
            bends.push(parent.a);
        }
    }

    let mut cursor = Some(final_idx);
    let mut last_root: Option<Point> = None;
    while let Some(idx) = cursor {
        let node = &arena[idx as usize];
        let rp = node.root.point;
        if last_root.is_none_or(|prev| !prev.close_to(rp, EPS_GEOM)) {
            bends.push(rp);
            last_root = Some(rp);
        }
        cursor = node.parent;
    }

    let mut path = vec![q];
    for bend in bends.into_iter().rev() {
        if !path.last().unwrap().close_to(bend, EPS_GEOM) {
            path.push(bend);
        }
    }
    if !path.last().unwrap().close_to(t, EPS_GEOM) {
        path.push(t);
    }
    path
}

/// Generic best-first driver over caller-supplied start nodes, heuristic,
/// and termination test (checked at expansion). Runs to exhaustion when the
/// termination test never fires.
pub fn run_best_first(
    mesh: &Mesh,
    start: Vec<NodeData>,
    mut h: impl FnMut(&Successor) -> f64,
    mut terminate: impl FnMut(&NodeData) -> bool,
) -> (Vec<NodeData>, SearchStats) {
    let mut engine = Engine::new(mesh);
    engine.trace = true;
    for node in start {
        engine.push(node);
    }
    while let Some(idx) = engine.pop() {
        let node = engine.arena[idx as usize].clone();
        if terminate(&node) {
            break;
        }
        if engine.stale(&node) {
            continue;
        }
        engine.record_root(&node);
        for s in successors(mesh, &node, false) {
            if !s.observable && engine.prune_root(s.root.id, s.g) {
                continue;
            }
            let f = s.g + h(&s);
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
                source: node.source,
            });
        }
    }
    let Engine { arena, stats, .. } = engine;
    (arena, stats)
}

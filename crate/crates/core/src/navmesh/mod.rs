//! Navigation-mesh data model: convex polygons over the traversable region,
//! edge adjacency, point location, validation, and the obstacle scenes meshes
//! are built from.

pub mod io;
mod triangulate;

pub use triangulate::{triangulate, TriangulateError};

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::geometry::{orientation, Orientation, Point, Segment, EPS_GEOM, EPS_ORIENT};

/// A convex polygon of the mesh: a counter-clockwise vertex ring plus, for
/// each ring edge `(v_i, v_{i+1})`, the polygon on the other side (`None` for
/// obstacle or map boundary).
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<u32>,
    pub neighbors: Vec<Option<u32>>,
    /// Mesh edge ids aligned with the ring; derived during assembly.
    pub edges: Vec<u32>,
}

impl Polygon {
    pub fn ring_len(&self) -> usize {
        self.vertices.len()
    }
}

/// An undirected mesh edge with its incident polygons (one for walls, two for
/// interior edges).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub polys: [Option<u32>; 2],
}

impl Edge {
    pub fn is_wall(&self) -> bool {
        self.polys[1].is_none()
    }
}

/// Immutable navigation mesh. Construct via [`Mesh::assemble`],
/// [`triangulate`], or [`io::load_mesh`].
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub polygons: Vec<Polygon>,
    pub edges: Vec<Edge>,
    pub vertex_to_polygons: Vec<Vec<u32>>,
    wall_vertex: Vec<bool>,
    grid: LocateGrid,
}

#[derive(Debug, Error, PartialEq)]
pub enum MeshBuildError {
    #[error("polygon {polygon}: vertex index {index} out of range ({count} vertices)")]
    VertexOutOfRange { polygon: usize, index: u32, count: usize },
    #[error("polygon {polygon}: ring has fewer than 3 vertices")]
    RingTooShort { polygon: usize },
    #[error("polygon {polygon}: neighbor list length {neighbors} does not match ring length {ring}")]
    NeighborCountMismatch { polygon: usize, neighbors: usize, ring: usize },
    #[error("polygon {polygon}: degenerate edge ({a}, {a})")]
    DegenerateEdge { polygon: usize, a: u32 },
    #[error("edge ({a}, {b}) is shared by more than two polygons")]
    OverSharedEdge { a: u32, b: u32 },
    #[error("vertex {vertex} has non-finite coordinates")]
    NonFiniteVertex { vertex: usize },
}

impl Mesh {
    /// Derives edges, adjacency indices and the locate grid from raw polygon
    /// rings. Only structural impossibilities error here; semantic problems
    /// (winding, asymmetric neighbor claims) are reported by [`validate`].
    pub fn assemble(
        vertices: Vec<Point>,
        polygons: Vec<(Vec<u32>, Vec<Option<u32>>)>,
    ) -> Result<Mesh, MeshBuildError> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(MeshBuildError::NonFiniteVertex { vertex: i });
            }
        }
        let mut polys = Vec::with_capacity(polygons.len());
        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_ids: HashMap<(u32, u32), u32> = HashMap::new();

        for (pi, (ring, neighbors)) in polygons.into_iter().enumerate() {
            if ring.len() < 3 {
                return Err(MeshBuildError::RingTooShort { polygon: pi });
            }
            if neighbors.len() != ring.len() {
                return Err(MeshBuildError::NeighborCountMismatch {
                    polygon: pi,
                    neighbors: neighbors.len(),
                    ring: ring.len(),
                });
            }
            for &v in &ring {
                if v as usize >= vertices.len() {
                    return Err(MeshBuildError::VertexOutOfRange {
                        polygon: pi,
                        index: v,
                        count: vertices.len(),
                    });
                }
            }
            let mut edge_list = Vec::with_capacity(ring.len());
            for i in 0..ring.len() {
                let a = ring[i];
                let b = ring[(i + 1) % ring.len()];
                if a == b {
                    return Err(MeshBuildError::DegenerateEdge { polygon: pi, a });
                }
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(Edge { a: key.0, b: key.1, polys: [None, None] });
                    (edges.len() - 1) as u32
                });
                let e = &mut edges[id as usize];
                if e.polys[0].is_none() {
                    e.polys[0] = Some(pi as u32);
                } else if e.polys[1].is_none() {
                    e.polys[1] = Some(pi as u32);
                } else {
                    return Err(MeshBuildError::OverSharedEdge { a: key.0, b: key.1 });
                }
                edge_list.push(id);
            }
            polys.push(Polygon { vertices: ring, neighbors, edges: edge_list });
        }

        let mut vertex_to_polygons = vec![Vec::new(); vertices.len()];
        for (pi, p) in polys.iter().enumerate() {
            for &v in &p.vertices {
                vertex_to_polygons[v as usize].push(pi as u32);
            }
        }

        let mut wall_vertex = vec![false; vertices.len()];
        for e in &edges {
            if e.is_wall() {
                wall_vertex[e.a as usize] = true;
                wall_vertex[e.b as usize] = true;
            }
        }

        let grid = LocateGrid::build(&vertices, &polys);
        Ok(Mesh { vertices, polygons: polys, edges, vertex_to_polygons, wall_vertex, grid })
    }

    pub fn vertex(&self, id: u32) -> Point {
        self.vertices[id as usize]
    }

    pub fn edge_segment(&self, edge: u32) -> Segment {
        let e = &self.edges[edge as usize];
        Segment::new(self.vertex(e.a), self.vertex(e.b))
    }

    /// Bounding box over all vertices.
    pub fn bbox(&self) -> (Point, Point) {
        bbox_of(&self.vertices)
    }

    /// Id of the polygon whose closed region contains `p`; ties on shared
    /// edges resolve to the smallest id.
    pub fn locate_point(&self, p: Point) -> Option<u32> {
        self.grid
            .candidates(p)
            .iter()
            .copied()
            .filter(|&pi| self.point_in_polygon(pi, p))
            .min()
    }

    /// All polygons whose closed region contains `p` (more than one when `p`
    /// lies on a shared edge or vertex).
    pub fn containing_polygons(&self, p: Point) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .grid
            .candidates(p)
            .iter()
            .copied()
            .filter(|&pi| self.point_in_polygon(pi, p))
            .collect();
        out.sort_unstable();
        out
    }

    /// Closed-region containment with an `EPS_GEOM` margin on the boundary.
    pub fn point_in_polygon(&self, polygon: u32, p: Point) -> bool {
        let poly = &self.polygons[polygon as usize];
        for i in 0..poly.vertices.len() {
            let a = self.vertex(poly.vertices[i]);
            let b = self.vertex(poly.vertices[(i + 1) % poly.vertices.len()]);
            let cross = (b - a).cross(p - a);
            if cross < -EPS_GEOM * a.dist(b) {
                return false;
            }
        }
        true
    }

    /// True if the vertex borders at least one wall edge, making it a
    /// candidate turning point for taut paths.
    pub fn vertex_on_wall(&self, vertex: u32) -> bool {
        self.wall_vertex[vertex as usize]
    }
}

fn bbox_of(points: &[Point]) -> (Point, Point) {
    let mut min = Point::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min.x = min.x.min(p.x);
        min.y = min.y.min(p.y);
        max.x = max.x.max(p.x);
        max.y = max.y.max(p.y);
    }
    (min, max)
}

/// Uniform bucket index over polygon bounding boxes; bucket size is the map
/// extent divided by 64.
#[derive(Clone, Debug)]
struct LocateGrid {
    min: Point,
    inv_cell: f64,
    dims: (usize, usize),
    buckets: Vec<Vec<u32>>,
}

const GRID_DIVISIONS: f64 = 64.0;

impl LocateGrid {
    fn build(vertices: &[Point], polygons: &[Polygon]) -> LocateGrid {
        let (min, max) = bbox_of(vertices);
        let extent = (max.x - min.x).max(max.y - min.y).max(EPS_GEOM);
        let cell = extent / GRID_DIVISIONS;
        let nx = (((max.x - min.x) / cell).ceil() as usize + 1).max(1);
        let ny = (((max.y - min.y) / cell).ceil() as usize + 1).max(1);
        let mut grid = LocateGrid {
            min,
            inv_cell: 1.0 / cell,
            dims: (nx, ny),
            buckets: vec![Vec::new(); nx * ny],
        };
        for (pi, poly) in polygons.iter().enumerate() {
            let pts: Vec<Point> = poly.vertices.iter().map(|&v| vertices[v as usize]).collect();
            let (lo, hi) = bbox_of(&pts);
            let (x0, y0) = grid.cell_of(lo);
            let (x1, y1) = grid.cell_of(hi);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    grid.buckets[y * nx + x].push(pi as u32);
                }
            }
        }
        grid
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let x = (((p.x - self.min.x) * self.inv_cell) as isize).clamp(0, self.dims.0 as isize - 1);
        let y = (((p.y - self.min.y) * self.inv_cell) as isize).clamp(0, self.dims.1 as isize - 1);
        (x as usize, y as usize)
    }

    fn candidates(&self, p: Point) -> &[u32] {
        if p.x < self.min.x - EPS_GEOM || p.y < self.min.y - EPS_GEOM {
            return &[];
        }
        let (x, y) = self.cell_of(p);
        &self.buckets[y * self.dims.0 + x]
    }
}

/// One broken mesh invariant, naming the entity and the rule.
#[derive(Clone, Debug, PartialEq)]
pub enum ValidationIssue {
    RingTooShort { polygon: usize },
    NeighborCountMismatch { polygon: usize },
    VertexOutOfRange { polygon: usize, index: u32 },
    DuplicateRingVertex { polygon: usize, vertex: u32 },
    WoundClockwise { polygon: usize },
    NotConvex { polygon: usize, at_vertex: u32 },
    NeighborOutOfRange { polygon: usize, neighbor: u32 },
    SelfNeighbor { polygon: usize },
    AsymmetricAdjacency { polygon: usize, neighbor: u32, edge: (u32, u32) },
    NeighborWithoutSharedEdge { polygon: usize, neighbor: u32, edge: (u32, u32) },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationIssue::*;
        match self {
            RingTooShort { polygon } => write!(f, "polygon {polygon}: ring shorter than 3"),
            NeighborCountMismatch { polygon } => {
                write!(f, "polygon {polygon}: neighbor list length differs from ring length")
            }
            VertexOutOfRange { polygon, index } => {
                write!(f, "polygon {polygon}: vertex index {index} out of range")
            }
            DuplicateRingVertex { polygon, vertex } => {
                write!(f, "polygon {polygon}: vertex {vertex} repeats in ring")
            }
            WoundClockwise { polygon } => {
                write!(f, "polygon {polygon}: ring wound clockwise, must be counter-clockwise")
            }
            NotConvex { polygon, at_vertex } => {
                write!(f, "polygon {polygon}: reflex turn at vertex {at_vertex}")
            }
            NeighborOutOfRange { polygon, neighbor } => {
                write!(f, "polygon {polygon}: neighbor id {neighbor} out of range")
            }
            SelfNeighbor { polygon } => write!(f, "polygon {polygon}: lists itself as a neighbor"),
            AsymmetricAdjacency { polygon, neighbor, edge } => write!(
                f,
                "polygon {polygon} claims polygon {neighbor} across edge ({}, {}), but the claim is not mutual",
                edge.0, edge.1
            ),
            NeighborWithoutSharedEdge { polygon, neighbor, edge } => write!(
                f,
                "polygon {polygon} claims polygon {neighbor} across edge ({}, {}), which is not an edge of that polygon",
                edge.0, edge.1
            ),
        }
    }
}

/// Checks every mesh invariant and reports all violations found.
pub fn validate(mesh: &Mesh) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    for (pi, poly) in mesh.polygons.iter().enumerate() {
        let n = poly.vertices.len();
        if n < 3 {
            issues.push(ValidationIssue::RingTooShort { polygon: pi });
            continue;
        }
        if poly.neighbors.len() != n {
            issues.push(ValidationIssue::NeighborCountMismatch { polygon: pi });
        }
        let mut bad_index = false;
        for &v in &poly.vertices {
            if v as usize >= mesh.vertices.len() {
                issues.push(ValidationIssue::VertexOutOfRange { polygon: pi, index: v });
                bad_index = true;
            }
        }
        if bad_index {
            continue;
        }
        let mut seen = poly.vertices.clone();
        seen.sort_unstable();
        for w in seen.windows(2) {
            if w[0] == w[1] {
                issues.push(ValidationIssue::DuplicateRingVertex { polygon: pi, vertex: w[0] });
            }
        }

        let pts: Vec<Point> = poly.vertices.iter().map(|&v| mesh.vertex(v)).collect();
        let area2: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                let j = (i + 1) % n;
                s += pts[i].cross(pts[j]);
            }
            s
        };
        if area2 < -EPS_ORIENT {
            issues.push(ValidationIssue::WoundClockwise { polygon: pi });
        } else {
            for i in 0..n {
                let a = pts[i];
                let b = pts[(i + 1) % n];
                let c = pts[(i + 2) % n];
                if orientation(a, b, c) == Orientation::Right {
                    issues.push(ValidationIssue::NotConvex {
                        polygon: pi,
                        at_vertex: poly.vertices[(i + 1) % n],
                    });
                    break;
                }
            }
        }

        for (i, &nb) in poly.neighbors.iter().enumerate() {
            let Some(nb) = nb else { continue };
            let a = poly.vertices[i];
            let b = poly.vertices[(i + 1) % n];
            let edge = (a.min(b), a.max(b));
            if nb as usize >= mesh.polygons.len() {
                issues.push(ValidationIssue::NeighborOutOfRange { polygon: pi, neighbor: nb });
                continue;
            }
            if nb as usize == pi {
                issues.push(ValidationIssue::SelfNeighbor { polygon: pi });
                continue;
            }
            let other = &mesh.polygons[nb as usize];
            let m = other.vertices.len();
            let mut mutual = false;
            let mut shares_edge = false;
            for j in 0..m {
                let c = other.vertices[j];
                let d = other.vertices[(j + 1) % m];
                if (c.min(d), c.max(d)) == edge {
                    shares_edge = true;
                    if other.neighbors.len() == m && other.neighbors[j] == Some(pi as u32) {
                        mutual = true;
                    }
                }
            }
            if !shares_edge {
                issues.push(ValidationIssue::NeighborWithoutSharedEdge {
                    polygon: pi,
                    neighbor: nb,
                    edge,
                });
            } else if !mutual {
                issues.push(ValidationIssue::AsymmetricAdjacency {
                    polygon: pi,
                    neighbor: nb,
                    edge,
                });
            }
        }
    }
    issues
}

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("boundary is empty or inverted")]
    BadBoundary,
    #[error("obstacle {obstacle}: ring has fewer than 3 vertices")]
    RingTooShort { obstacle: usize },
    #[error("obstacle {obstacle}: ring self-intersects between edges {i} and {j}")]
    SelfIntersecting { obstacle: usize, i: usize, j: usize },
    #[error("obstacle {obstacle}: zero-area ring")]
    ZeroArea { obstacle: usize },
    #[error("obstacle {obstacle} extends outside the boundary")]
    ObstacleOutsideBoundary { obstacle: usize },
    #[error("target {target} at ({x}, {y}) is not in traversable space")]
    TargetNotTraversable { target: usize, x: f64, y: f64 },
    #[error("point has non-finite coordinates")]
    NonFinite,
}

/// Where a point sits relative to a simple polygon ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Containment {
    Inside,
    OnBoundary,
    Outside,
}

/// Even-odd containment for an arbitrary simple ring, with an `EPS_GEOM`
/// boundary band reported separately.
pub fn point_in_ring(p: Point, ring: &[Point]) -> Containment {
    let n = ring.len();
    for i in 0..n {
        let s = Segment::new(ring[i], ring[(i + 1) % n]);
        if crate::geometry::point_on_segment(p, s) {
            return Containment::OnBoundary;
        }
    }
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (b.x - a.x) * (p.y - a.y) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    if inside {
        Containment::Inside
    } else {
        Containment::Outside
    }
}

/// Twice the signed area of a ring (positive for counter-clockwise).
pub fn ring_area2(ring: &[Point]) -> f64 {
    let mut s = 0.0;
    for i in 0..ring.len() {
        let j = (i + 1) % ring.len();
        s += ring[i].cross(ring[j]);
    }
    s
}

fn ring_self_intersection(ring: &[Point]) -> Option<(usize, usize)> {
    let n = ring.len();
    for i in 0..n {
        let si = Segment::new(ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            // Skip adjacent edges, which always share an endpoint.
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            match crate::geometry::segment_intersection(si, Segment::new(ring[j], ring[(j + 1) % n])) {
                crate::geometry::SegmentIntersection::None => {}
                _ => return Some((i, j)),
            }
        }
    }
    None
}

/// An obstacle map: rectangular traversable boundary, clockwise obstacle
/// rings, and the target set queries run against.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub boundary: (Point, Point),
    pub obstacles: Vec<Vec<Point>>,
    pub targets: Vec<Point>,
}

impl Scene {
    /// Validates invariants and normalizes obstacle rings to clockwise order.
    pub fn new(
        boundary: (Point, Point),
        obstacles: Vec<Vec<Point>>,
        targets: Vec<Point>,
    ) -> Result<Scene, SceneError> {
        let (lo, hi) = boundary;
        if !lo.is_finite() || !hi.is_finite() {
            return Err(SceneError::NonFinite);
        }
        if hi.x - lo.x <= EPS_GEOM || hi.y - lo.y <= EPS_GEOM {
            return Err(SceneError::BadBoundary);
        }
        let mut rings = Vec::with_capacity(obstacles.len());
        for (oi, mut ring) in obstacles.into_iter().enumerate() {
            if ring.len() < 3 {
                return Err(SceneError::RingTooShort { obstacle: oi });
            }
            if ring.iter().any(|p| !p.is_finite()) {
                return Err(SceneError::NonFinite);
            }
            if let Some((i, j)) = ring_self_intersection(&ring) {
                return Err(SceneError::SelfIntersecting { obstacle: oi, i, j });
            }
            let area2 = ring_area2(&ring);
            if area2.abs() <= EPS_ORIENT {
                return Err(SceneError::ZeroArea { obstacle: oi });
            }
            if area2 > 0.0 {
                ring.reverse();
            }
            for p in &ring {
                if p.x < lo.x - EPS_GEOM
                    || p.x > hi.x + EPS_GEOM
                    || p.y < lo.y - EPS_GEOM
                    || p.y > hi.y + EPS_GEOM
                {
                    return Err(SceneError::ObstacleOutsideBoundary { obstacle: oi });
                }
            }
            rings.push(ring);
        }
        let scene = Scene { boundary, obstacles: rings, targets: Vec::new() };
        for (ti, &t) in targets.iter().enumerate() {
            if !t.is_finite() {
                return Err(SceneError::NonFinite);
            }
            if !scene.is_traversable(t) {
                return Err(SceneError::TargetNotTraversable { target: ti, x: t.x, y: t.y });
            }
        }
        Ok(Scene { targets, ..scene })
    }

    /// Inside the boundary and in no obstacle's open interior.
    pub fn is_traversable(&self, p: Point) -> bool {
        let (lo, hi) = self.boundary;
        if p.x < lo.x - EPS_GEOM || p.x > hi.x + EPS_GEOM || p.y < lo.y - EPS_GEOM || p.y > hi.y + EPS_GEOM
        {
            return false;
        }
        self.obstacles.iter().all(|ring| point_in_ring(p, ring) != Containment::Inside)
    }
}

#[derive(Debug, Error)]
pub enum SceneFromMeshError {
    #[error("mesh has no wall edges; cannot recover a boundary")]
    NoBoundary,
    #[error("wall edges around vertex {vertex} do not form simple loops")]
    AmbiguousLoops { vertex: u32 },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Reconstructs the obstacle scene a mesh was built from: wall edges are
/// stitched into loops, the largest loop becomes the boundary and the rest
/// become obstacles. Targets are supplied by the caller.
pub fn scene_from_mesh(mesh: &Mesh, targets: &[Point]) -> Result<Scene, SceneFromMeshError> {
    let mut incident: HashMap<u32, Vec<usize>> = HashMap::new();
    let wall_edges: Vec<&Edge> = mesh.edges.iter().filter(|e| e.is_wall()).collect();
    if wall_edges.is_empty() {
        return Err(SceneFromMeshError::NoBoundary);
    }
    for (i, e) in wall_edges.iter().enumerate() {
        incident.entry(e.a).or_default().push(i);
        incident.entry(e.b).or_default().push(i);
    }
    for (&v, list) in &incident {
        if list.len() != 2 {
            return Err(SceneFromMeshError::AmbiguousLoops { vertex: v });
        }
    }
    let mut used = vec![false; wall_edges.len()];
    let mut loops: Vec<Vec<Point>> = Vec::new();
    for start in 0..wall_edges.len() {
        if used[start] {
            continue;
        }
        let mut ring = Vec::new();
        let mut edge = start;
        let mut at = wall_edges[start].a;
        loop {
            used[edge] = true;
            ring.push(mesh.vertex(at));
            let e = wall_edges[edge];
            at = if e.a == at { e.b } else { e.a };
            let next = incident[&at].iter().copied().find(|&i| !used[i]);
            match next {
                Some(n) => edge = n,
                None => break,
            }
        }
        loops.push(ring);
    }
    let outer = loops
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| ring_area2(a).abs().total_cmp(&ring_area2(b).abs()))
        .map(|(i, _)| i)
        .unwrap();
    let boundary = bbox_of(&loops[outer]);
    let obstacles: Vec<Vec<Point>> = loops
        .into_iter()
        .enumerate()
        .filter(|(i, _)| *i != outer)
        .map(|(_, r)| r)
        .collect();
    Ok(Scene::new(boundary, obstacles, targets.to_vec())?)
}

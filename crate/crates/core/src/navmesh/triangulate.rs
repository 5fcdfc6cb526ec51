//! Constrained Delaunay triangulation of an obstacle scene into a navigation
//! mesh, via the `spade` crate.

use std::collections::HashMap;

use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};
use thiserror::Error;

use crate::geometry::{point_on_segment, segment_intersection, Point, Segment, SegmentIntersection, EPS_GEOM};
use crate::navmesh::{point_in_ring, Containment, Mesh, MeshBuildError, Scene};

#[derive(Debug, Error)]
pub enum TriangulateError {
    #[error("obstacle {a_obstacle} edge {a_edge} crosses obstacle {b_obstacle} edge {b_edge} near ({x}, {y})")]
    CrossingEdges {
        a_obstacle: usize,
        a_edge: usize,
        b_obstacle: usize,
        b_edge: usize,
        x: f64,
        y: f64,
    },
    #[error("could not insert vertex at ({x}, {y}): {reason}")]
    Insertion { x: f64, y: f64, reason: String },
    #[error("constraint edge ({}, {}) to ({}, {}) conflicts with the triangulation", a.x, a.y, b.x, b.y)]
    Constraint { a: Point, b: Point },
    #[error("triangulation produced an inconsistent mesh: {0}")]
    Build(#[from] MeshBuildError),
}

/// One wall segment tagged with where it came from. Ring index
/// `usize::MAX` marks the rectangular map boundary.
struct WallEdge {
    ring: usize,
    index: usize,
    seg: Segment,
}

fn scene_wall_edges(scene: &Scene) -> Vec<WallEdge> {
    let mut out = Vec::new();
    let (lo, hi) = scene.boundary;
    let corners = [
        Point::new(lo.x, lo.y),
        Point::new(hi.x, lo.y),
        Point::new(hi.x, hi.y),
        Point::new(lo.x, hi.y),
    ];
    for i in 0..4 {
        out.push(WallEdge {
            ring: usize::MAX,
            index: i,
            seg: Segment::new(corners[i], corners[(i + 1) % 4]),
        });
    }
    for (ri, ring) in scene.obstacles.iter().enumerate() {
        for i in 0..ring.len() {
            out.push(WallEdge {
                ring: ri,
                index: i,
                seg: Segment::new(ring[i], ring[(i + 1) % ring.len()]),
            });
        }
    }
    out
}

/// Intersections that are not endpoint touches make the scene untriangulable;
/// report the first offending pair instead of letting the triangulator panic.
fn check_crossings(walls: &[WallEdge]) -> Result<(), TriangulateError> {
    for i in 0..walls.len() {
        for j in (i + 1)..walls.len() {
            let (a, b) = (&walls[i], &walls[j]);
            if a.ring == b.ring {
                continue; // same ring: simplicity already validated
            }
            let hit = match segment_intersection(a.seg, b.seg) {
                SegmentIntersection::None => continue,
                SegmentIntersection::Overlap(_, _) => continue, // collinear touch
                SegmentIntersection::Point(p) => p,
            };
            // A touch has the meeting point at an endpoint of at least one
            // segment and not interior to the other's far side; a proper
            // crossing is interior to both.
            let interior = |s: Segment, p: Point| {
                !p.close_to(s.a, EPS_GEOM) && !p.close_to(s.b, EPS_GEOM)
            };
            if interior(a.seg, hit) && interior(b.seg, hit) {
                return Err(TriangulateError::CrossingEdges {
                    a_obstacle: a.ring,
                    a_edge: a.index,
                    b_obstacle: b.ring,
                    b_edge: b.index,
                    x: hit.x,
                    y: hit.y,
                });
            }
        }
    }
    Ok(())
}

/// Builds a triangle navigation mesh of the traversable region: boundary
/// corners and obstacle vertices become mesh vertices, every wall segment
/// becomes a constraint edge, and triangles inside obstacles are discarded.
pub fn triangulate(scene: &Scene) -> Result<Mesh, TriangulateError> {
    let walls = scene_wall_edges(scene);
    check_crossings(&walls)?;

    let (lo, hi) = scene.boundary;
    let mut points = vec![
        Point::new(lo.x, lo.y),
        Point::new(hi.x, lo.y),
        Point::new(hi.x, hi.y),
        Point::new(lo.x, hi.y),
    ];
    for ring in &scene.obstacles {
        points.extend_from_slice(ring);
    }

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::new();
    let mut handles = Vec::with_capacity(points.len());
    for p in &points {
        let h = cdt.insert(Point2::new(p.x, p.y)).map_err(|e| TriangulateError::Insertion {
            x: p.x,
            y: p.y,
            reason: format!("{e:?}"),
        })?;
        handles.push(h);
    }

    // A wall may pass through other input vertices (obstacles touching at a
    // point or resting against the boundary); split it there so every
    // constraint edge is vertex-free in its interior.
    for wall in &walls {
        let seg = wall.seg;
        if seg.is_degenerate() {
            continue;
        }
        let mut cuts: Vec<(f64, usize)> = vec![(0.0, usize::MAX), (1.0, usize::MAX)];
        for (pi, &p) in points.iter().enumerate() {
            if p.close_to(seg.a, EPS_GEOM) || p.close_to(seg.b, EPS_GEOM) {
                continue;
            }
            if point_on_segment(p, seg) {
                cuts.push((seg.param_of(p), pi));
            }
        }
        cuts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let handle_at = |cut: &(f64, usize)| {
            if cut.1 != usize::MAX {
                handles[cut.1]
            } else if cut.0 == 0.0 {
                handles[points.iter().position(|p| p.close_to(seg.a, EPS_GEOM)).unwrap()]
            } else {
                handles[points.iter().position(|p| p.close_to(seg.b, EPS_GEOM)).unwrap()]
            }
        };
        for pair in cuts.windows(2) {
            let from = handle_at(&pair[0]);
            let to = handle_at(&pair[1]);
            if from == to {
                continue;
            }
            if !cdt.can_add_constraint(from, to) {
                return Err(TriangulateError::Constraint { a: seg.a, b: seg.b });
            }
            cdt.add_constraint(from, to);
        }
    }

    let mut vertices = vec![Point::new(0.0, 0.0); cdt.num_vertices()];
    for v in cdt.vertices() {
        let pos = v.position();
        vertices[v.fix().index()] = Point::new(pos.x, pos.y);
    }

    let mut rings: Vec<Vec<u32>> = Vec::new();
    for face in cdt.inner_faces() {
        let vs = face.vertices();
        let ring: Vec<u32> = vs.iter().map(|v| v.fix().index() as u32).collect();
        let centroid = {
            let ps = face.positions();
            Point::new(
                (ps[0].x + ps[1].x + ps[2].x) / 3.0,
                (ps[0].y + ps[1].y + ps[2].y) / 3.0,
            )
        };
        let in_obstacle = scene
            .obstacles
            .iter()
            .any(|ring| point_in_ring(centroid, ring) == Containment::Inside);
        if !in_obstacle {
            rings.push(ring);
        }
    }

    // Pair triangles across shared edges to fill in neighbor ids.
    let mut by_edge: HashMap<(u32, u32), Vec<(usize, usize)>> = HashMap::new();
    for (ti, ring) in rings.iter().enumerate() {
        for i in 0..3 {
            let a = ring[i];
            let b = ring[(i + 1) % 3];
            by_edge.entry((a.min(b), a.max(b))).or_default().push((ti, i));
        }
    }
    let mut polygons: Vec<(Vec<u32>, Vec<Option<u32>>)> =
        rings.iter().map(|r| (r.clone(), vec![None; 3])).collect();
    for sides in by_edge.values() {
        if sides.len() == 2 {
            let (t0, i0) = sides[0];
            let (t1, i1) = sides[1];
            polygons[t0].1[i0] = Some(t1 as u32);
            polygons[t1].1[i1] = Some(t0 as u32);
        }
    }

    Ok(Mesh::assemble(vertices, polygons)?)
}

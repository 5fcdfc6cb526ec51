//! Scenario generation: a portable seeded RNG, tiled obstacle maps, random
//! and clustered target sets, and the hand-built scenes the stress tests use.

use thiserror::Error;

use crate::geometry::{closest_point_on_segment, Point, Segment};
use crate::navmesh::{Mesh, Scene, SceneError};

/// SplitMix64: tiny, seedable, identical output on every platform.
#[derive(Clone, Debug)]
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [lo, hi).
    pub fn range_usize(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo < hi);
        lo + (self.next_u64() % (hi - lo) as u64) as usize
    }

    /// Standard normal via Box-Muller.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.next_f64().max(f64::MIN_POSITIVE);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.range_usize(0, i + 1);
            items.swap(i, j);
        }
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("obstacle {index} is not a simple polygon")]
    NonSimple { index: usize },
    #[error("obstacle {index} has near-zero extent")]
    Degenerate { index: usize },
    #[error("no obstacle polygons supplied")]
    Empty,
    #[error("target count rounds to zero; need at least one target")]
    NoTargets,
    #[error("could not place a traversable point after {attempts} attempts")]
    PlacementFailed { attempts: usize },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

const CELL_SIZE: f64 = 10.0;
const CELL_MARGIN: f64 = 0.15;

/// Lays the given polygons out on a ⌈√n⌉ × ⌈√n⌉ grid, one per cell, each
/// scaled into its cell with a margin so no two obstacles touch. Cell
/// assignment is shuffled by the seed.
pub fn generate_tiled_map(obstacles: &[Vec<Point>], seed: u64) -> Result<Scene, GenError> {
    if obstacles.is_empty() {
        return Err(GenError::Empty);
    }
    for (i, ring) in obstacles.iter().enumerate() {
        if ring.len() >= 3 && ring_is_self_intersecting(ring) {
            return Err(GenError::NonSimple { index: i });
        }
        if ring.len() < 3 || crate::navmesh::ring_area2(ring).abs() <= 1e-12 {
            return Err(GenError::Degenerate { index: i });
        }
    }
    let cells = (obstacles.len() as f64).sqrt().ceil() as usize;
    let side = cells as f64 * CELL_SIZE;

    let mut slots: Vec<usize> = (0..cells * cells).collect();
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut slots);

    let mut placed = Vec::with_capacity(obstacles.len());
    for (ring, &slot) in obstacles.iter().zip(slots.iter()) {
        let (cx, cy) = (slot % cells, slot / cells);
        let cell_lo = Point::new(cx as f64 * CELL_SIZE, cy as f64 * CELL_SIZE);
        let inner = CELL_SIZE * (1.0 - 2.0 * CELL_MARGIN);

        let (lo, hi) = ring_bbox(ring);
        let extent = (hi.x - lo.x).max(hi.y - lo.y);
        let scale = inner / extent;
        let center = Point::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);
        let cell_center =
            Point::new(cell_lo.x + CELL_SIZE / 2.0, cell_lo.y + CELL_SIZE / 2.0);
        placed.push(
            ring.iter()
                .map(|&p| cell_center + (p - center) * scale)
                .collect::<Vec<Point>>(),
        );
    }
    Ok(Scene::new((Point::new(0.0, 0.0), Point::new(side, side)), placed, vec![])?)
}

fn ring_bbox(ring: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in ring {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

fn ring_is_self_intersecting(ring: &[Point]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let si = Segment::new(ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            if (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            if !matches!(
                crate::geometry::segment_intersection(si, Segment::new(ring[j], ring[(j + 1) % n])),
                crate::geometry::SegmentIntersection::None
            ) {
                return true;
            }
        }
    }
    false
}

/// Vertices of a regular n-gon, counter-clockwise.
pub fn regular_polygon(sides: usize, radius: f64) -> Vec<Point> {
    (0..sides)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / sides as f64;
            Point::new(radius * a.cos(), radius * a.sin())
        })
        .collect()
}

/// Random star-shaped polygon around the origin: simple by construction,
/// not necessarily convex.
pub fn random_polygon(rng: &mut Rng, sides: usize) -> Vec<Point> {
    let mut angles: Vec<f64> = (0..sides).map(|_| rng.range_f64(0.0, std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    // Degenerate clusters of angles make needle polygons; spread them.
    for (i, a) in angles.iter_mut().enumerate() {
        *a = (*a + std::f64::consts::TAU * i as f64 / sides as f64) / 2.0;
    }
    angles
        .iter()
        .map(|&a| {
            let r = rng.range_f64(0.45, 1.0);
            Point::new(r * a.cos(), r * a.sin())
        })
        .collect()
}

/// How targets are scattered over a map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetDistribution {
    Random,
    Clustered,
}

/// Exactly `count` uniform points over the mesh's traversable space.
pub fn random_targets_count(mesh: &Mesh, count: usize, seed: u64) -> Result<Vec<Point>, GenError> {
    if count == 0 {
        return Err(GenError::NoTargets);
    }
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(sample_traversable(mesh, &mut rng)?);
    }
    Ok(out)
}

/// Target generation per the benchmark methodology: `round(density · |V|)`
/// uniform points, or a single Gaussian cluster of `cluster_size` points
/// (σ = 2% of map extent) around a random traversable seed point.
pub fn generate_targets(
    mesh: &Mesh,
    density: f64,
    distribution: TargetDistribution,
    cluster_size: usize,
    seed: u64,
) -> Result<Vec<Point>, GenError> {
    match distribution {
        TargetDistribution::Random => {
            let count = (density * mesh.vertices.len() as f64).round() as usize;
            random_targets_count(mesh, count, seed)
        }
        TargetDistribution::Clustered => {
            if cluster_size == 0 {
                return Err(GenError::NoTargets);
            }
            let mut rng = Rng::new(seed);
            let center = sample_traversable(mesh, &mut rng)?;
            let (lo, hi) = mesh.bbox();
            let sigma = 0.02 * (hi.x - lo.x).max(hi.y - lo.y);
            let mut out = Vec::with_capacity(cluster_size);
            for _ in 0..cluster_size {
                let p = loop {
                    let candidate = Point::new(
                        center.x + sigma * rng.gaussian(),
                        center.y + sigma * rng.gaussian(),
                    );
                    if mesh.locate_point(candidate).is_some() {
                        break candidate;
                    }
                };
                out.push(p);
            }
            Ok(out)
        }
    }
}

fn sample_traversable(mesh: &Mesh, rng: &mut Rng) -> Result<Point, GenError> {
    let (lo, hi) = mesh.bbox();
    const ATTEMPTS: usize = 100_000;
    for _ in 0..ATTEMPTS {
        let p = Point::new(rng.range_f64(lo.x, hi.x), rng.range_f64(lo.y, hi.y));
        if mesh.locate_point(p).is_some() {
            return Ok(p);
        }
    }
    Err(GenError::PlacementFailed { attempts: ATTEMPTS })
}

/// Distance from `p` to the nearest wall (obstacle edge or map boundary).
pub fn wall_clearance(scene: &Scene, p: Point) -> f64 {
    let (lo, hi) = scene.boundary;
    let mut best = (p.x - lo.x).min(hi.x - p.x).min(p.y - lo.y).min(hi.y - p.y);
    for ring in &scene.obstacles {
        for i in 0..ring.len() {
            let s = Segment::new(ring[i], ring[(i + 1) % ring.len()]);
            best = best.min(closest_point_on_segment(p, s).1);
        }
    }
    best
}

/// Traversable points with a safety margin from all walls, for use as query
/// points where mesh location and scene containment must agree.
pub fn random_query_points(scene: &Scene, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = Rng::new(seed);
    let (lo, hi) = scene.boundary;
    let margin = 1e-3 * (hi.x - lo.x).max(hi.y - lo.y);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Point::new(rng.range_f64(lo.x, hi.x), rng.range_f64(lo.y, hi.y));
        if scene.is_traversable(p) && wall_clearance(scene, p) > margin {
            out.push(p);
        }
    }
    out
}

/// A random small scene for oracle-equivalence sweeps: 2–5 star-shaped
/// obstacles (≤ 30 vertices total) tiled without contact, plus 10–50
/// uniform targets kept clear of walls.
pub fn random_scene(seed: u64) -> Scene {
    let mut rng = Rng::new(seed ^ 0xA5A5_5A5A_DEAD_BEEF);
    let n_obstacles = rng.range_usize(2, 6);
    let mut shapes = Vec::with_capacity(n_obstacles);
    let mut budget = 30usize;
    for i in 0..n_obstacles {
        let remaining = n_obstacles - i;
        let max_sides = (budget - 3 * (remaining - 1)).min(6);
        let sides = rng.range_usize(3, max_sides.max(3) + 1);
        budget -= sides;
        shapes.push(random_polygon(&mut rng, sides));
    }
    let base = generate_tiled_map(&shapes, rng.next_u64()).expect("tiled placement");
    let n_targets = rng.range_usize(10, 51);
    let (lo, hi) = base.boundary;
    let margin = 1e-3 * (hi.x - lo.x).max(hi.y - lo.y);
    let mut targets = Vec::with_capacity(n_targets);
    while targets.len() < n_targets {
        let p = Point::new(rng.range_f64(lo.x, hi.x), rng.range_f64(lo.y, hi.y));
        if base.is_traversable(p) && wall_clearance(&base, p) > margin {
            targets.push(p);
        }
    }
    Scene::new(base.boundary, base.obstacles, targets).expect("valid random scene")
}

/// Query point and target layout of the pocket stress scene: the target `D`
/// is Euclidean-nearest to the query but tucked inside a pocket obstacle
/// that opens away from it, so Euclidean streaming visits `D` first and
/// wastes a search on it.
pub const POCKET_QUERY: Point = Point::new(0.0, 0.0);

/// Scene with targets A(-4,0), B(0,4.2), C(0,-4.4) in the open and D(3,0)
/// inside the pocket; obstacle-NN order is A, B, C, D.
pub fn pocket_scene() -> Scene {
    let pocket = vec![
        Point::new(2.0, -2.0),
        Point::new(4.5, -2.0),
        Point::new(4.5, -1.2),
        Point::new(2.8, -1.2),
        Point::new(2.8, 1.2),
        Point::new(4.5, 1.2),
        Point::new(4.5, 2.0),
        Point::new(2.0, 2.0),
    ];
    let targets = vec![
        Point::new(-4.0, 0.0),
        Point::new(0.0, 4.2),
        Point::new(0.0, -4.4),
        Point::new(3.0, 0.0),
    ];
    Scene::new((Point::new(-6.0, -6.0), Point::new(7.0, 6.0)), vec![pocket], targets).unwrap()
}

/// Corridor whose inner walls are finely subdivided, with `n` targets fanned
/// on an arc at the west mouth so they stay nearly equidistant from every
/// corridor edge: fence labels cannot dominate one another and pile up.
pub fn corridor_scene(n_targets: usize) -> Scene {
    let segments = 16;
    let xs: Vec<f64> =
        (0..=segments).map(|i| -10.0 + 20.0 * i as f64 / segments as f64).collect();

    // Corridor-facing edges carry intermediate vertices so the mesh has many
    // short edges inside the corridor.
    let mut top: Vec<Point> = xs.iter().map(|&x| Point::new(x, 1.0)).collect();
    top.push(Point::new(10.0, 2.0));
    top.push(Point::new(-10.0, 2.0));

    let mut bottom = vec![Point::new(-10.0, -2.0), Point::new(10.0, -2.0)];
    bottom.extend(xs.iter().rev().map(|&x| Point::new(x, -1.0)));

    let mut targets = Vec::with_capacity(n_targets);
    for i in 0..n_targets {
        let theta = (100.0 + 160.0 * i as f64 / (n_targets.max(2) - 1) as f64).to_radians();
        targets.push(Point::new(-10.0 + 3.0 * theta.cos(), 3.0 * theta.sin()));
    }
    Scene::new(
        (Point::new(-14.0, -14.0), Point::new(14.0, 14.0)),
        vec![top, bottom],
        targets,
    )
    .unwrap()
}

/// Query point of the fence-trap scene.
pub const TRAP_QUERY: Point = Point::new(6.0, 2.0);

/// Scene built to expose the naive fence heuristic's inconsistency: a long
/// wall hides the lone target, and a decoy block bends the search so a
/// child node's fence label looks closer (straight-line) than its parent's
/// did, making f drop along a parent chain.
pub fn trap_scene() -> Scene {
    let wall = vec![
        Point::new(3.0, 6.0),
        Point::new(9.0, 6.0),
        Point::new(9.0, 6.5),
        Point::new(3.0, 6.5),
    ];
    let block = vec![
        Point::new(3.5, 3.5),
        Point::new(4.5, 3.5),
        Point::new(4.5, 4.5),
        Point::new(3.5, 4.5),
    ];
    let targets = vec![Point::new(6.0, 8.0)];
    Scene::new((Point::new(0.0, 0.0), Point::new(12.0, 12.0)), vec![wall, block], targets)
        .unwrap()
}

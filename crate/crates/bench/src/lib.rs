//! Shared fixtures for the query benchmarks: a seeded tiled map with
//! deterministic query points, so runs are comparable across machines.

use oknn_core::navmesh::triangulate;
use oknn_core::scenario::{self, Rng};
use oknn_core::{Mesh, Point, Scene};

pub struct Fixture {
    pub scene: Scene,
    pub mesh: Mesh,
    pub queries: Vec<Point>,
}

/// A 30-obstacle tiled map (random octagons) with 16 query points.
pub fn fixture(seed: u64) -> Fixture {
    let mut rng = Rng::new(seed);
    let shapes: Vec<Vec<Point>> =
        (0..30).map(|_| scenario::random_polygon(&mut rng, 8)).collect();
    let scene = scenario::generate_tiled_map(&shapes, seed).expect("tiled map");
    let mesh = triangulate(&scene).expect("mesh");
    let queries = scenario::random_query_points(&scene, 16, seed ^ 0xBEEF);
    Fixture { scene, mesh, queries }
}

pub fn targets(mesh: &Mesh, count: usize, seed: u64) -> Vec<Point> {
    scenario::random_targets_count(mesh, count, seed).expect("targets")
}

//! The README snippet: k-nearest targets by obstacle-avoiding distance.

use oknn_core::navmesh::triangulate;
use oknn_core::{knn, scenario};

fn main() {
    let scene = scenario::random_scene(7);
    let mesh = triangulate(&scene).unwrap();
    let q = scene.targets[0];
    let result = knn::knn_interval(&mesh, q, &scene.targets, 3, false).unwrap();
    for (rank, (target, dist)) in result.hits.iter().enumerate() {
        println!("{rank}: target {target} at distance {dist}");
    }
}

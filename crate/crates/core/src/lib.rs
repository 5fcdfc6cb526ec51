//! Obstacle-avoiding k-nearest-neighbour queries over navigation meshes.
//!
//! The traversable plane is decomposed into convex polygons; queries run an
//! interval-based best-first search over mesh edges (Polyanya-style) under one
//! of four strategies: a root-to-interval lower bound, a nearest-unretrieved-
//! target bound, a precomputed fence heuristic, or incremental Euclidean
//! restriction driving repeated point-to-point searches. A visibility-graph
//! oracle provides ground truth at desk scale.

pub mod fence;
pub mod geometry;
pub mod heuristics;
pub mod ier;
pub mod knn;
pub mod navmesh;
pub mod oracle;
pub mod scenario;
pub mod search;
pub mod suite;

pub use geometry::{Point, Segment};
pub use navmesh::{Mesh, Scene};

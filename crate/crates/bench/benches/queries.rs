//! Query-strategy benchmarks. Each iteration answers all 16 fixture
//! queries so no single lucky placement dominates the numbers.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oknn_bench::{fixture, targets};
use oknn_core::ier::{ier_knn, TargetIndex};
use oknn_core::navmesh::triangulate;
use oknn_core::{fence, knn, search};

const K: usize = 5;

fn bench_point_to_point(c: &mut Criterion) {
    let fx = fixture(7);
    c.bench_function("p2p/tiled-30x8gon", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for w in fx.queries.windows(2) {
                if let Some((d, _, _)) =
                    search::point_to_point(&fx.mesh, w[0], w[1]).unwrap()
                {
                    acc += d;
                }
            }
            black_box(acc)
        })
    });
}

fn bench_knn(c: &mut Criterion) {
    let fx = fixture(7);
    let mut group = c.benchmark_group("knn");
    group.sample_size(30);

    for &(label, count) in &[("targets-8", 8usize), ("targets-200", 200)] {
        let ts = targets(&fx.mesh, count, 11);
        let store = fence::preprocess(&fx.mesh, &ts);
        let index = TargetIndex::new(&ts);
        let k = K.min(count);

        group.bench_function(BenchmarkId::new("interval", label), |b| {
            b.iter(|| {
                let mut acc = 0.0;
                for &q in &fx.queries {
                    let r = knn::knn_interval(&fx.mesh, q, &ts, k, false).unwrap();
                    acc += r.hits.iter().map(|h| h.1).sum::<f64>();
                }
                black_box(acc)
            })
        });
        group.bench_function(BenchmarkId::new("target-aware", label), |b| {
            b.iter(|| {
                let mut acc = 0.0;
                for &q in &fx.queries {
                    let (r, _) =
                        knn::knn_target_aware(&fx.mesh, q, &ts, k, false, false).unwrap();
                    acc += r.hits.iter().map(|h| h.1).sum::<f64>();
                }
                black_box(acc)
            })
        });
        group.bench_function(BenchmarkId::new("fence", label), |b| {
            b.iter(|| {
                let mut acc = 0.0;
                for &q in &fx.queries {
                    let r = fence::knn_fence(&fx.mesh, &store, q, &ts, k, false).unwrap();
                    acc += r.hits.iter().map(|h| h.1).sum::<f64>();
                }
                black_box(acc)
            })
        });
        group.bench_function(BenchmarkId::new("fence-check-1nn", label), |b| {
            b.iter(|| {
                let mut acc = 0.0;
                for &q in &fx.queries {
                    if let Some(hit) = fence::fence_check_nn(&fx.mesh, &store, q).unwrap() {
                        acc += hit.distance;
                    }
                }
                black_box(acc)
            })
        });
        group.bench_function(BenchmarkId::new("ier", label), |b| {
            b.iter(|| {
                let mut acc = 0.0;
                for &q in &fx.queries {
                    let r = ier_knn(&fx.mesh, &index, q, k).unwrap();
                    acc += r.hits.iter().map(|h| h.1).sum::<f64>();
                }
                black_box(acc)
            })
        });
    }
    group.finish();
}

fn bench_build(c: &mut Criterion) {
    let fx = fixture(7);
    let mut group = c.benchmark_group("build");

    group.bench_function("triangulate", |b| {
        b.iter(|| black_box(triangulate(&fx.scene).unwrap().polygons.len()))
    });
    for &(label, count) in &[("targets-8", 8usize), ("targets-200", 200)] {
        let ts = targets(&fx.mesh, count, 11);
        group.bench_function(BenchmarkId::new("fence-preprocess", label), |b| {
            b.iter(|| black_box(fence::preprocess(&fx.mesh, &ts).build.labels_stored))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_point_to_point, bench_knn, bench_build);
criterion_main!(benches);

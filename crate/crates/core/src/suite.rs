//! Batch benchmarking: deterministic scenario generation, the same queries
//! run through every requested algorithm, cross-checked answers, and CSV
//! reporting.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

use crate::fence::{fence_check_nn, knn_fence, preprocess, FenceStore};
use crate::geometry::Point;
use crate::ier::{ier_knn, TargetIndex};
use crate::knn::{knn_interval, knn_target_aware};
use crate::navmesh::{triangulate, Scene, SceneError, TriangulateError};
use crate::oracle;
use crate::scenario::{self, GenError};
use crate::search::QueryError;

pub use crate::scenario::TargetDistribution;

pub const CSV_HEADER: &str =
    "algo,query_id,k,rank,target_id,distance,expansions,generated,heuristic_us,total_us,false_hits";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    /// Interval-heuristic k-NN.
    Hv,
    /// Target-aware-heuristic k-NN.
    Ht,
    /// Fence-heuristic k-NN.
    Hf,
    /// Fence checking (1-NN straight off the labels).
    Fc,
    /// Incremental Euclidean restriction.
    Ier,
    /// Brute-force visibility-graph reference.
    Oracle,
}

impl Algo {
    pub fn parse(s: &str) -> Option<Algo> {
        match s {
            "hv" => Some(Algo::Hv),
            "ht" => Some(Algo::Ht),
            "hf" => Some(Algo::Hf),
            "fc" => Some(Algo::Fc),
            "ier" => Some(Algo::Ier),
            "oracle" => Some(Algo::Oracle),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Hv => "hv",
            Algo::Ht => "ht",
            Algo::Hf => "hf",
            Algo::Fc => "fc",
            Algo::Ier => "ier",
            Algo::Oracle => "oracle",
        }
    }

    fn needs_store(self) -> bool {
        matches!(self, Algo::Hf | Algo::Fc)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapSource {
    File(PathBuf),
    /// A generated scene, fully determined by its seed.
    Synthetic(u64),
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub map: MapSource,
    pub k: usize,
    pub density: f64,
    pub distribution: TargetDistribution,
    pub cluster_size: usize,
    pub query_count: usize,
    pub seed: u64,
    pub algos: Vec<Algo>,
}

#[derive(Debug, Error, PartialEq)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl ScenarioConfig {
    /// Parses the `key = value` config format (one pair per line, `#`
    /// comments). Unknown and duplicate keys are errors; `map` is required.
    pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let mut map: Option<MapSource> = None;
        let mut k = 5usize;
        let mut density = 0.01f64;
        let mut distribution = TargetDistribution::Random;
        let mut cluster_size = 50usize;
        let mut query_count = 100usize;
        let mut seed = 1u64;
        let mut algos: Vec<Algo> = vec![Algo::Hv, Algo::Ht, Algo::Hf, Algo::Fc, Algo::Ier];
        let mut seen: Vec<String> = Vec::new();

        let fail = |line: usize, message: String| Err(ConfigError { line, message });

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return fail(line, format!("expected `key = value`, found `{content}`"));
            };
            let key = key.trim();
            let value = value.trim();
            if seen.iter().any(|s| s == key) {
                return fail(line, format!("duplicate key `{key}`"));
            }
            seen.push(key.to_string());
            match key {
                "map" => {
                    map = Some(if let Some(s) = value.strip_prefix("synthetic:") {
                        let seed = s.trim().parse::<u64>().map_err(|_| ConfigError {
                            line,
                            message: format!("invalid synthetic map seed `{s}`"),
                        })?;
                        MapSource::Synthetic(seed)
                    } else {
                        MapSource::File(PathBuf::from(value))
                    });
                }
                "k" => {
                    k = value.parse().map_err(|_| ConfigError {
                        line,
                        message: format!("invalid k `{value}`"),
                    })?;
                    if k == 0 {
                        return fail(line, "k must be at least 1".to_string());
                    }
                }
                "density" => {
                    density = value.parse().map_err(|_| ConfigError {
                        line,
                        message: format!("invalid density `{value}`"),
                    })?;
                    if !(density > 0.0 && density <= 1.0) {
                        return fail(line, format!("density must be in (0, 1], found {density}"));
                    }
                }
                "distribution" => {
                    distribution = match value {
                        "random" => TargetDistribution::Random,
                        "clustered" => TargetDistribution::Clustered,
                        _ => {
                            return fail(
                                line,
                                format!("distribution must be `random` or `clustered`, found `{value}`"),
                            )
                        }
                    };
                }
                "cluster_size" => {
                    cluster_size = value.parse().map_err(|_| ConfigError {
                        line,
                        message: format!("invalid cluster_size `{value}`"),
                    })?;
                    if cluster_size == 0 {
                        return fail(line, "cluster_size must be at least 1".to_string());
                    }
                }
                "query_count" => {
                    query_count = value.parse().map_err(|_| ConfigError {
                        line,
                        message: format!("invalid query_count `{value}`"),
                    })?;
                    if query_count == 0 {
                        return fail(line, "query_count must be at least 1".to_string());
                    }
                }
                "seed" => {
                    seed = value.parse().map_err(|_| ConfigError {
                        line,
                        message: format!("invalid seed `{value}`"),
                    })?;
                }
                "algos" => {
                    algos = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            Algo::parse(s).ok_or_else(|| ConfigError {
                                line,
                                message: format!("unknown algorithm `{s}`"),
                            })
                        })
                        .collect::<Result<_, _>>()?;
                    if algos.is_empty() {
                        return fail(line, "algos must name at least one algorithm".to_string());
                    }
                }
                _ => return fail(line, format!("unknown key `{key}`")),
            }
        }

        let Some(map) = map else {
            return fail(0, "missing required key `map`".to_string());
        };
        Ok(ScenarioConfig {
            map,
            k,
            density,
            distribution,
            cluster_size,
            query_count,
            seed,
            algos,
        })
    }
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("scene file: {0}")]
    SceneFile(#[from] crate::navmesh::io::ParseError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("mesh: {0}")]
    Mesh(#[from] TriangulateError),
    #[error("query failed: {0}")]
    Query(#[from] QueryError),
    #[error("generation: {0}")]
    Gen(#[from] GenError),
    #[error("no algorithms requested")]
    NoAlgorithms,
    #[error(
        "cross-check failed: query {query_id} rank {rank}: {algo_a}={dist_a} vs {algo_b}={dist_b}\n{repro}"
    )]
    CrossCheck {
        query_id: usize,
        rank: usize,
        algo_a: &'static str,
        algo_b: &'static str,
        dist_a: String,
        dist_b: String,
        repro: String,
    },
}

/// One algorithm's run on one query.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub algo: &'static str,
    pub query_id: usize,
    pub k: usize,
    /// `(target id, distance)` per rank, nondecreasing.
    pub hits: Vec<(u32, f64)>,
    pub expansions: usize,
    pub generated: usize,
    pub heuristic_us: u64,
    pub total_us: u64,
    pub false_hits: u64,
    pub labels_touched: usize,
}

pub struct SuiteOutcome {
    pub records: Vec<RunRecord>,
    pub csv: String,
    pub targets: Vec<Point>,
    pub queries: Vec<Point>,
    /// Present when any fence algorithm ran.
    pub fence_build_us: Option<u64>,
    pub label_histogram: Vec<usize>,
}

pub fn load_map(source: &MapSource) -> Result<Scene, SuiteError> {
    match source {
        MapSource::File(path) => {
            let text = std::fs::read_to_string(path)?;
            Ok(crate::navmesh::io::load_scene(&text)?)
        }
        MapSource::Synthetic(seed) => Ok(scenario::random_scene(*seed)),
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Runs every requested algorithm over the scenario's queries, asserts all
/// of them agree on every distance, and renders the CSV. Any disagreement
/// aborts with a reproduction bundle instead of writing results.
pub fn run_suite(scene: &Scene, cfg: &ScenarioConfig) -> Result<SuiteOutcome, SuiteError> {
    if cfg.algos.is_empty() {
        return Err(SuiteError::NoAlgorithms);
    }
    let mesh = triangulate(scene)?;
    let targets = scenario::generate_targets(
        &mesh,
        cfg.density,
        cfg.distribution,
        cfg.cluster_size,
        cfg.seed,
    )?;
    // Queries come from an offset stream so the two point sets are
    // independent draws.
    let queries = scenario::random_query_points(
        scene,
        cfg.query_count,
        cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
    );

    let scene_for_oracle = Scene {
        boundary: scene.boundary,
        obstacles: scene.obstacles.clone(),
        targets: targets.clone(),
    };

    let mut fence_build_us = None;
    let mut store: Option<FenceStore> = None;
    if cfg.algos.iter().any(|a| a.needs_store()) {
        let t0 = Instant::now();
        store = Some(preprocess(&mesh, &targets));
        fence_build_us = Some(t0.elapsed().as_micros() as u64);
    }
    let index = TargetIndex::new(&targets);

    let mut records: Vec<RunRecord> = Vec::new();
    for &algo in &cfg.algos {
        for (qi, &q) in queries.iter().enumerate() {
            let t0 = Instant::now();
            let mut record = match algo {
                Algo::Hv => {
                    let r = knn_interval(&mesh, q, &targets, cfg.k, false)?;
                    RunRecord {
                        algo: algo.as_str(),
                        query_id: qi,
                        k: cfg.k,
                        hits: r.hits,
                        expansions: r.stats.expansions,
                        generated: r.stats.generated,
                        heuristic_us: r.stats.heuristic_us,
                        total_us: 0,
                        false_hits: 0,
                        labels_touched: 0,
                    }
                }
                Algo::Ht => {
                    let (r, _) = knn_target_aware(&mesh, q, &targets, cfg.k, false, false)?;
                    RunRecord {
                        algo: algo.as_str(),
                        query_id: qi,
                        k: cfg.k,
                        hits: r.hits,
                        expansions: r.stats.expansions,
                        generated: r.stats.generated,
                        heuristic_us: r.stats.heuristic_us,
                        total_us: 0,
                        false_hits: 0,
                        labels_touched: 0,
                    }
                }
                Algo::Hf => {
                    let r = knn_fence(&mesh, store.as_ref().unwrap(), q, &targets, cfg.k, false)?;
                    RunRecord {
                        algo: algo.as_str(),
                        query_id: qi,
                        k: cfg.k,
                        hits: r.hits,
                        expansions: r.stats.expansions,
                        generated: r.stats.generated,
                        heuristic_us: r.stats.heuristic_us,
                        total_us: 0,
                        false_hits: 0,
                        labels_touched: 0,
                    }
                }
                Algo::Fc => {
                    let r = fence_check_nn(&mesh, store.as_ref().unwrap(), q)?;
                    let (hits, expansions, generated, labels_touched) = match r {
                        Some(check) => (
                            vec![(check.target, check.distance)],
                            check.stats.expansions,
                            check.stats.generated,
                            check.labels_touched,
                        ),
                        None => (Vec::new(), 0, 0, 0),
                    };
                    RunRecord {
                        algo: algo.as_str(),
                        query_id: qi,
                        k: 1,
                        hits,
                        expansions,
                        generated,
                        heuristic_us: 0,
                        total_us: 0,
                        false_hits: 0,
                        labels_touched,
                    }
                }
                Algo::Ier => {
                    let r = ier_knn(&mesh, &index, q, cfg.k)?;
                    RunRecord {
                        algo: algo.as_str(),
                        query_id: qi,
                        k: cfg.k,
                        hits: r.hits,
                        expansions: r.stats.expansions,
                        generated: r.stats.generated,
                        heuristic_us: r.stats.heuristic_us,
                        total_us: 0,
                        false_hits: r.false_hits,
                        labels_touched: 0,
                    }
                }
                Algo::Oracle => {
                    let hits = oracle::oracle_knn(&scene_for_oracle, q, cfg.k)
                        .into_iter()
                        .map(|(id, d)| (id as u32, d))
                        .collect();
                    RunRecord {
                        algo: algo.as_str(),
                        query_id: qi,
                        k: cfg.k,
                        hits,
                        expansions: 0,
                        generated: 0,
                        heuristic_us: 0,
                        total_us: 0,
                        false_hits: 0,
                        labels_touched: 0,
                    }
                }
            };
            record.total_us = t0.elapsed().as_micros() as u64;
            records.push(record);
        }
    }

    cross_check(&records, scene, cfg, &queries)?;

    let mut csv = String::with_capacity(records.len() * 64);
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for r in &records {
        for (rank, &(target, dist)) in r.hits.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.algo,
                r.query_id,
                r.k,
                rank,
                target,
                dist,
                r.expansions,
                r.generated,
                r.heuristic_us,
                r.total_us,
                r.false_hits
            );
        }
    }

    let label_histogram = store.as_ref().map(|s| s.label_histogram()).unwrap_or_default();
    Ok(SuiteOutcome { records, csv, targets, queries, fence_build_us, label_histogram })
}

/// Every pair of algorithms must agree on every distance at every rank they
/// both produced; the 1-NN-only algorithm is held to rank 0.
fn cross_check(
    records: &[RunRecord],
    scene: &Scene,
    cfg: &ScenarioConfig,
    queries: &[Point],
) -> Result<(), SuiteError> {
    let n_queries = queries.len();
    let by_algo: Vec<(&'static str, &[RunRecord])> = {
        let mut out = Vec::new();
        let mut at = 0;
        while at < records.len() {
            out.push((records[at].algo, &records[at..at + n_queries]));
            at += n_queries;
        }
        out
    };

    for (ai, &(name_a, recs_a)) in by_algo.iter().enumerate() {
        for &(name_b, recs_b) in &by_algo[ai + 1..] {
            for qi in 0..n_queries {
                let a = &recs_a[qi];
                let b = &recs_b[qi];
                let common = if a.k == b.k {
                    // Same k: both must find the same number of answers.
                    if a.hits.len() != b.hits.len() {
                        return Err(cross_check_failure(
                            scene, cfg, queries, qi, a.hits.len().min(b.hits.len()), name_a,
                            name_b,
                            &format!("{} hits", a.hits.len()),
                            &format!("{} hits", b.hits.len()),
                        ));
                    }
                    a.hits.len()
                } else {
                    // A 1-NN record against a k-NN record: rank 0 only, and
                    // the two must agree on whether anything is reachable.
                    if (a.hits.is_empty()) != (b.hits.is_empty()) {
                        return Err(cross_check_failure(
                            scene, cfg, queries, qi, 0, name_a, name_b,
                            &format!("{} hits", a.hits.len()),
                            &format!("{} hits", b.hits.len()),
                        ));
                    }
                    a.hits.len().min(b.hits.len())
                };
                for rank in 0..common {
                    let da = a.hits[rank].1;
                    let db = b.hits[rank].1;
                    if !rel_close(da, db, 1e-6) {
                        return Err(cross_check_failure(
                            scene,
                            cfg,
                            queries,
                            qi,
                            rank,
                            name_a,
                            name_b,
                            &format!("{da}"),
                            &format!("{db}"),
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cross_check_failure(
    scene: &Scene,
    cfg: &ScenarioConfig,
    queries: &[Point],
    query_id: usize,
    rank: usize,
    algo_a: &'static str,
    algo_b: &'static str,
    dist_a: &str,
    dist_b: &str,
) -> SuiteError {
    let q = queries[query_id];
    let mut repro = String::new();
    let _ = writeln!(repro, "# reproduction bundle");
    let _ = writeln!(repro, "# seed = {}", cfg.seed);
    let _ = writeln!(repro, "# k = {}", cfg.k);
    let _ = writeln!(repro, "# query {} = ({}, {})", query_id, q.x, q.y);
    repro.push_str(&crate::navmesh::io::save_scene(scene));
    SuiteError::CrossCheck {
        query_id,
        rank,
        algo_a,
        algo_b,
        dist_a: dist_a.to_string(),
        dist_b: dist_b.to_string(),
        repro,
    }
}

/// Strips the two wall-clock columns so runs can be compared byte for byte.
pub fn mask_timing_columns(csv: &str) -> String {
    let mut out = String::with_capacity(csv.len());
    for line in csv.lines() {
        let fields: Vec<&str> = line.split(',').collect();
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            if (i == 8 || i == 9) && *f != "heuristic_us" && *f != "total_us" {
                out.push('-');
            } else {
                out.push_str(f);
            }
        }
        out.push('\n');
    }
    out
}

//! `oknn`: mesh building, fence preprocessing, single queries, and batch
//! benchmarking over obstacle-avoiding k-NN search.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input data, 3 benchmark
//! cross-check disagreement.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use oknn_core::fence::{fence_check_nn, knn_fence, preprocess, FenceStore};
use oknn_core::ier::{ier_knn, TargetIndex};
use oknn_core::knn::{knn_interval, knn_target_aware, KnnResult};
use oknn_core::navmesh::{io, scene_from_mesh, triangulate, validate};
use oknn_core::oracle::oracle_knn;
use oknn_core::scenario::{self, TargetDistribution};
use oknn_core::search::SearchStats;
use oknn_core::suite::{load_map, run_suite, ScenarioConfig, SuiteError};
use oknn_core::{Mesh, Point};

#[derive(Parser)]
#[command(name = "oknn", version, about = "Obstacle-avoiding k-nearest-neighbour toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build or validate navigation meshes.
    Mesh {
        #[command(subcommand)]
        cmd: MeshCmd,
    },
    /// Build fence label stores.
    Fence {
        #[command(subcommand)]
        cmd: FenceCmd,
    },
    /// Run a single query and print the ranked answer.
    Query(QueryArgs),
    /// Run a full benchmark suite from a config file and write CSV.
    Bench {
        /// Key = value config file (map, k, density, distribution,
        /// cluster_size, query_count, seed, algos).
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Generate scenes and target sets.
    Gen {
        #[command(subcommand)]
        cmd: GenCmd,
    },
}

#[derive(Subcommand)]
enum MeshCmd {
    /// Triangulate a scene file into a mesh file.
    Build {
        scene: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Check every mesh invariant; nonzero exit on violations.
    Check { mesh: PathBuf },
}

#[derive(Subcommand)]
enum FenceCmd {
    /// Preprocess fence labels for a mesh and target set.
    Build {
        mesh: PathBuf,
        targets: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    /// Interval-heuristic best-first search.
    Hv,
    /// Target-aware heuristic search.
    Ht,
    /// Fence-heuristic search (needs --store).
    Hf,
    /// Fence checking, 1-NN only (needs --store).
    Fc,
    /// Incremental Euclidean restriction.
    Ier,
    /// Brute-force visibility-graph reference.
    Oracle,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long, value_enum)]
    algo: AlgoArg,
    #[arg(long)]
    mesh: PathBuf,
    /// Fence store; required by hf and fc.
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Query point as `X,Y`.
    #[arg(long, value_name = "X,Y")]
    q: String,
}

#[derive(Subcommand)]
enum GenCmd {
    /// Tile polygons from a `polys 1` file onto a grid scene.
    Tiled {
        #[arg(long)]
        obstacles: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Sample a target set over a mesh.
    Targets {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        density: f64,
        #[arg(long, value_enum, default_value = "random")]
        dist: DistArg,
        /// Cluster population when --dist clustered.
        #[arg(long, default_value_t = 50)]
        cluster_size: usize,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Random,
    Clustered,
}

/// Failure with the exit code it maps to: 1 usage, 2 bad data, 3 cross-check.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn invalid(message: impl std::fmt::Display) -> Failure {
    Failure { code: 2, message: message.to_string() }
}

fn main() -> ExitCode {
    // Die quietly when the read end of a pipe goes away (`oknn ... | head`),
    // like every other line-oriented tool, instead of panicking on EPIPE.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Mesh { cmd } => match cmd {
            MeshCmd::Build { scene, out } => mesh_build(&scene, &out),
            MeshCmd::Check { mesh } => mesh_check(&mesh),
        },
        Cmd::Fence { cmd } => match cmd {
            FenceCmd::Build { mesh, targets, out } => fence_build(&mesh, &targets, &out),
        },
        Cmd::Query(args) => query(args),
        Cmd::Bench { config, out } => bench(&config, &out),
        Cmd::Gen { cmd } => match cmd {
            GenCmd::Tiled { obstacles, seed, out } => gen_tiled(&obstacles, seed, &out),
            GenCmd::Targets { mesh, density, dist, cluster_size, seed, out } => {
                gen_targets(&mesh, density, dist, cluster_size, seed, &out)
            }
        },
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn write(path: &Path, content: &str) -> Result<(), Failure> {
    std::fs::write(path, content).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_mesh_file(path: &Path) -> Result<Mesh, Failure> {
    io::load_mesh(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_targets_file(path: &Path) -> Result<Vec<Point>, Failure> {
    io::load_targets(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn mesh_build(scene_path: &Path, out: &Path) -> Result<(), Failure> {
    let scene = io::load_scene(&read(scene_path)?)
        .map_err(|e| invalid(format!("{}: {e}", scene_path.display())))?;
    let mesh = triangulate(&scene).map_err(invalid)?;
    write(out, &io::save_mesh(&mesh))?;
    println!(
        "mesh: {} vertices, {} polygons, {} edges -> {}",
        mesh.vertices.len(),
        mesh.polygons.len(),
        mesh.edges.len(),
        out.display()
    );
    Ok(())
}

fn mesh_check(mesh_path: &Path) -> Result<(), Failure> {
    let mesh = load_mesh_file(mesh_path)?;
    let issues = validate(&mesh);
    if issues.is_empty() {
        println!(
            "ok: {} vertices, {} polygons, {} edges",
            mesh.vertices.len(),
            mesh.polygons.len(),
            mesh.edges.len()
        );
        Ok(())
    } else {
        for issue in &issues {
            println!("violation: {issue}");
        }
        Err(invalid(format!("{} invariant violations", issues.len())))
    }
}

fn fence_build(mesh_path: &Path, targets_path: &Path, out: &Path) -> Result<(), Failure> {
    let mesh = load_mesh_file(mesh_path)?;
    let targets = load_targets_file(targets_path)?;
    if targets.is_empty() {
        return Err(invalid("target file holds no targets"));
    }
    let t0 = Instant::now();
    let store = preprocess(&mesh, &targets);
    let elapsed = t0.elapsed();
    store.save(out).map_err(|e| invalid(format!("{}: {e}", out.display())))?;

    let b = &store.build;
    println!(
        "fence build: {:.3} ms, {} labels on {} edges ({} expansions, {} blocked)",
        elapsed.as_secs_f64() * 1e3,
        b.labels_stored,
        store.label_histogram().len(),
        b.expansions,
        b.blocked
    );
    if b.skipped_targets > 0 {
        println!("warning: {} targets were off-mesh and skipped", b.skipped_targets);
    }
    let hist = store.label_histogram();
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for &n in &hist {
        match counts.last_mut() {
            Some((v, c)) if *v == n => *c += 1,
            _ => counts.push((n, 1)),
        }
    }
    println!("labels-per-edge histogram:");
    for (labels, edges) in counts {
        println!("  {labels} label{}: {edges} edge{}", plural(labels), plural(edges));
    }
    Ok(())
}

fn plural(n: usize) -> &'static str {
    if n == 1 { "" } else { "s" }
}

fn parse_query_point(s: &str) -> Result<Point, Failure> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| usage(format!("--q expects `X,Y`, found `{s}`")))?;
    let x: f64 = x.trim().parse().map_err(|_| usage(format!("invalid x coordinate `{x}`")))?;
    let y: f64 = y.trim().parse().map_err(|_| usage(format!("invalid y coordinate `{y}`")))?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(usage("query coordinates must be finite"));
    }
    Ok(Point::new(x, y))
}

fn load_store(
    path: Option<&PathBuf>,
    mesh: &Mesh,
    targets: &[Point],
    algo: &str,
) -> Result<FenceStore, Failure> {
    let path = path.ok_or_else(|| usage(format!("--algo {algo} requires --store")))?;
    FenceStore::load(path, mesh, targets)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn query(args: QueryArgs) -> Result<(), Failure> {
    if args.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let mesh = load_mesh_file(&args.mesh)?;
    let targets = load_targets_file(&args.targets)?;
    let q = parse_query_point(&args.q)?;

    let print_knn = |r: &KnnResult| {
        print_hits(&r.hits);
        print_stats(&r.stats);
        if r.truncated {
            println!("# truncated: fewer than k targets reachable");
        }
    };

    match args.algo {
        AlgoArg::Hv => {
            let r = knn_interval(&mesh, q, &targets, args.k, false).map_err(invalid)?;
            print_knn(&r);
        }
        AlgoArg::Ht => {
            let (r, _) =
                knn_target_aware(&mesh, q, &targets, args.k, false, false).map_err(invalid)?;
            print_knn(&r);
        }
        AlgoArg::Hf => {
            let store = load_store(args.store.as_ref(), &mesh, &targets, "hf")?;
            let r = knn_fence(&mesh, &store, q, &targets, args.k, false).map_err(invalid)?;
            print_knn(&r);
        }
        AlgoArg::Fc => {
            let store = load_store(args.store.as_ref(), &mesh, &targets, "fc")?;
            match fence_check_nn(&mesh, &store, q).map_err(invalid)? {
                Some(check) => {
                    print_hits(&[(check.target, check.distance)]);
                    print_stats(&check.stats);
                    println!("# labels touched: {}", check.labels_touched);
                }
                None => println!("# no reachable target"),
            }
        }
        AlgoArg::Ier => {
            let index = TargetIndex::new(&targets);
            let r = ier_knn(&mesh, &index, q, args.k).map_err(invalid)?;
            print_hits(&r.hits);
            print_stats(&r.stats);
            println!("# searches: {}, false hits: {}", r.searches, r.false_hits);
            if r.truncated {
                println!("# truncated: fewer than k targets reachable");
            }
        }
        AlgoArg::Oracle => {
            if mesh.locate_point(q).is_none() {
                return Err(invalid(format!(
                    "query point ({}, {}) is not on the traversable mesh",
                    q.x, q.y
                )));
            }
            let scene = scene_from_mesh(&mesh, &targets).map_err(invalid)?;
            let hits: Vec<(u32, f64)> =
                oracle_knn(&scene, q, args.k).into_iter().map(|(i, d)| (i as u32, d)).collect();
            print_hits(&hits);
        }
    }
    Ok(())
}

fn print_hits(hits: &[(u32, f64)]) {
    for (rank, &(target, dist)) in hits.iter().enumerate() {
        println!("{rank} {target} {dist}");
    }
}

fn print_stats(stats: &SearchStats) {
    println!("# expansions: {}, generated: {}", stats.expansions, stats.generated);
}

fn bench(config_path: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = ScenarioConfig::parse(&read(config_path)?)
        .map_err(|e| invalid(format!("{}: {e}", config_path.display())))?;
    let scene = load_map(&cfg.map).map_err(invalid)?;
    match run_suite(&scene, &cfg) {
        Ok(outcome) => {
            write(out, &outcome.csv)?;
            println!(
                "wrote {} rows ({} runs) -> {}",
                outcome.csv.lines().count() - 1,
                outcome.records.len(),
                out.display()
            );
            if let Some(us) = outcome.fence_build_us {
                println!(
                    "fence build: {:.3} ms, {} fenced edges",
                    us as f64 / 1e3,
                    outcome.label_histogram.len()
                );
            }
            Ok(())
        }
        Err(SuiteError::CrossCheck { query_id, rank, algo_a, algo_b, dist_a, dist_b, repro }) => {
            let repro_path = out.with_extension("repro");
            write(&repro_path, &repro)?;
            Err(Failure {
                code: 3,
                message: format!(
                    "cross-check disagreement on query {query_id} rank {rank}: \
                     {algo_a}={dist_a} vs {algo_b}={dist_b}; repro bundle written to {}",
                    repro_path.display()
                ),
            })
        }
        Err(e) => Err(invalid(e)),
    }
}

fn gen_tiled(obstacles: &Path, seed: u64, out: &Path) -> Result<(), Failure> {
    let polys = io::load_polygons(&read(obstacles)?)
        .map_err(|e| invalid(format!("{}: {e}", obstacles.display())))?;
    let scene = scenario::generate_tiled_map(&polys, seed).map_err(invalid)?;
    write(out, &io::save_scene(&scene))?;
    let (lo, hi) = scene.boundary;
    println!(
        "scene: {} obstacles on a {}x{} map -> {}",
        scene.obstacles.len(),
        hi.x - lo.x,
        hi.y - lo.y,
        out.display()
    );
    Ok(())
}

fn gen_targets(
    mesh_path: &Path,
    density: f64,
    dist: DistArg,
    cluster_size: usize,
    seed: u64,
    out: &Path,
) -> Result<(), Failure> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(usage(format!("--density must be in (0, 1], found {density}")));
    }
    let mesh = load_mesh_file(mesh_path)?;
    let distribution = match dist {
        DistArg::Random => TargetDistribution::Random,
        DistArg::Clustered => TargetDistribution::Clustered,
    };
    let targets = scenario::generate_targets(&mesh, density, distribution, cluster_size, seed)
        .map_err(invalid)?;
    write(out, &io::save_targets(&targets))?;
    println!("targets: {} points -> {}", targets.len(), out.display());
    Ok(())
}

//! Command implementations behind the `forelem` binary: data generation,
//! variant runs with optional oracle verification, experiment grids, and the
//! variant listing. Everything returns an exit code so the binary stays a
//! thin parser.
//!
//! Exit codes: 0 success, 2 verification failure, 3 non-termination,
//! 4 usage error.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::apps::{
    self, io as appio, kmeans::verify, oracle, run_kmeans_variant, run_pagerank_variant,
    KMeansProblem, PageRankProblem, RunOptions, SparseMatrix,
};
use crate::datagen::{gen_clustered_points, gen_graph, ClusterGenConfig, GraphGenConfig};
use crate::executor::{run_whilelem, ExecutionState, Scheduler, Termination};
use crate::transforms::{
    builtin_variants, concretize, interchange, load_variants_file, materialize, orthogonalize,
    variant_by_name, AppKind, Layout, Variant,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 2;
pub const EXIT_NO_TERMINATION: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

pub const CSV_HEADER: &str =
    "app,variant,partitions,workers,sweeps,guards_fired,state_changes,calc_ms,verify,residual";

/// Everything one run needs. Mirrors the command-line surface.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub app: AppKind,
    pub variant: String,
    pub input: Option<PathBuf>,
    pub gen_n: usize,
    pub gen_dim: usize,
    pub gen_k: usize,
    pub gen_scale: u32,
    pub gen_edge_factor: usize,
    pub gen_size: usize,
    pub partitions: usize,
    pub workers: usize,
    pub sweeps_per_exchange: u32,
    pub epsilon: f64,
    pub convergence_delta: f64,
    pub threshold: Option<f64>,
    pub seed: u64,
    pub verify: bool,
    pub csv: Option<PathBuf>,
    pub max_sweeps: u64,
    pub layouts: Vec<Layout>,
    pub scheduler: Scheduler,
    pub variants_file: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            app: AppKind::KMeans,
            variant: "Kmeans_4".into(),
            input: None,
            gen_n: 1 << 12,
            gen_dim: 4,
            gen_k: 4,
            gen_scale: 10,
            gen_edge_factor: 8,
            gen_size: 32,
            partitions: 4,
            workers: 2,
            sweeps_per_exchange: 1,
            epsilon: 1e-10,
            convergence_delta: 0.0,
            threshold: None,
            seed: 1,
            verify: false,
            csv: None,
            max_sweeps: 100_000,
            layouts: vec![Layout::Aos],
            scheduler: Scheduler::SweepInOrder,
            variants_file: None,
        }
    }
}

/// One emitted CSV row.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub app: String,
    pub variant: String,
    pub partitions: usize,
    pub workers: usize,
    pub sweeps: u64,
    pub guards_fired: u64,
    pub state_changes: u64,
    pub calc_ms: f64,
    pub verify: Option<bool>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

impl RunRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.3},{},{}",
            self.app,
            self.variant,
            self.partitions,
            self.workers,
            self.sweeps,
            self.guards_fired,
            self.state_changes,
            self.calc_ms,
            self.verify.map(|v| if v { "pass" } else { "fail" }.to_string()).unwrap_or_default(),
            self.residual.map(|r| format!("{r:.3e}")).unwrap_or_default(),
        )
    }
}

fn write_csv(path: Option<&Path>, rows: &[RunRow], with_error_column: bool) -> std::io::Result<()> {
    let Some(path) = path else { return Ok(()) };
    let mut f = File::create(path)?;
    if with_error_column {
        writeln!(f, "{CSV_HEADER},error")?;
        for r in rows {
            writeln!(f, "{},{}", r.to_csv(), r.error.clone().unwrap_or_default())?;
        }
    } else {
        writeln!(f, "{CSV_HEADER}")?;
        for r in rows {
            writeln!(f, "{}", r.to_csv())?;
        }
    }
    Ok(())
}

fn load_extra_variants(path: Option<&Path>) -> Result<Vec<Variant>, String> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            load_variants_file(&text).map_err(|e| e.to_string())
        }
    }
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

pub fn cmd_generate_points(
    n: usize,
    dim: usize,
    k: usize,
    seed: u64,
    out: &Path,
) -> Result<i32, String> {
    if n == 0 {
        eprintln!("warning: n = 0, writing an empty point file");
        File::create(out).map_err(|e| e.to_string())?;
        println!("wrote 0 points to {}", out.display());
        return Ok(EXIT_OK);
    }
    if n < k || k == 0 || dim == 0 {
        return Err(format!("need n >= k >= 1 and dim >= 1 (n={n}, k={k}, dim={dim})"));
    }
    let (points, _) = gen_clustered_points(&ClusterGenConfig::new(n, dim, k, seed));
    let f = File::create(out).map_err(|e| e.to_string())?;
    appio::write_points(f, &points, dim).map_err(|e| e.to_string())?;
    println!("wrote {n} points (dim {dim}, {k} clusters, seed {seed}) to {}", out.display());
    Ok(EXIT_OK)
}

pub fn cmd_generate_graph(
    scale: u32,
    edge_factor: usize,
    seed: u64,
    keep_dangling: bool,
    out: &Path,
) -> Result<i32, String> {
    let mut cfg = GraphGenConfig::new(scale, seed).with_edge_factor(edge_factor);
    if keep_dangling {
        cfg = cfg.keep_dangling();
    }
    let edges = gen_graph(&cfg);
    let f = File::create(out).map_err(|e| e.to_string())?;
    appio::write_edges(f, &edges).map_err(|e| e.to_string())?;
    println!(
        "wrote {} edges ({} vertices, seed {seed}) to {}",
        edges.len(),
        cfg.vertices(),
        out.display()
    );
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn load_kmeans_problem(cfg: &RunConfig) -> Result<KMeansProblem, String> {
    let (points, dim) = match &cfg.input {
        Some(path) => {
            let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
            appio::read_points(f).map_err(|e| e.to_string())?
        }
        None => {
            let (p, _) =
                gen_clustered_points(&ClusterGenConfig::new(cfg.gen_n, cfg.gen_dim, cfg.gen_k, cfg.seed));
            (p, cfg.gen_dim)
        }
    };
    let mut prob =
        KMeansProblem::new(points, dim, cfg.gen_k, cfg.seed).map_err(|e| e.to_string())?;
    prob.convergence_delta = cfg.convergence_delta;
    prob.threshold = cfg.threshold;
    Ok(prob)
}

fn load_pagerank_problem(cfg: &RunConfig) -> Result<PageRankProblem, String> {
    let edges = match &cfg.input {
        Some(path) => {
            let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
            appio::read_edges(f).map_err(|e| e.to_string())?
        }
        None => gen_graph(&GraphGenConfig::new(cfg.gen_scale, cfg.seed).with_edge_factor(cfg.gen_edge_factor)),
    };
    let vertices = match &cfg.input {
        Some(_) => edges.iter().map(|&(u, v)| u.max(v) as usize + 1).max().unwrap_or(1),
        None => 1usize << cfg.gen_scale,
    };
    Ok(PageRankProblem::new(vertices, edges)
        .map_err(|e| e.to_string())?
        .with_epsilon(cfg.epsilon))
}

fn opts_from(cfg: &RunConfig) -> RunOptions {
    RunOptions {
        partitions: cfg.partitions.max(1),
        workers: cfg.workers.max(1),
        sweeps_per_exchange: cfg.sweeps_per_exchange.max(1),
        max_rounds: cfg.max_sweeps,
        scheduler: cfg.scheduler.clone(),
        exchange_override: None,
    }
}

fn run_kmeans_row(cfg: &RunConfig, variant: &Variant) -> Result<RunRow, String> {
    let prob = load_kmeans_problem(cfg)?;
    let run = run_kmeans_variant(&prob, variant, &opts_from(cfg), None)
        .map_err(|e| e.to_string())?;
    let mut row = RunRow {
        app: "kmeans".into(),
        variant: variant.name.clone(),
        partitions: cfg.partitions,
        workers: cfg.workers,
        sweeps: run.run.stats.sweeps,
        guards_fired: run.run.stats.guards_fired,
        state_changes: run.run.stats.state_changes,
        calc_ms: run.run.calc_seconds * 1e3,
        verify: None,
        residual: None,
        error: (run.run.termination == Termination::SweepBudgetExhausted)
            .then(|| "sweep budget exhausted".to_string()),
    };
    if cfg.verify {
        let centers = verify::centers_from_stats(&run.sums, &run.sizes, prob.dim);
        let violation =
            verify::fixed_point_violation(&prob.points, prob.dim, &run.assignments, &centers);
        let (counts_ok, gap) = verify::stats_consistency(
            &prob.points,
            prob.dim,
            &run.assignments,
            &run.sums,
            &run.sizes,
        );
        // threshold runs stop early by design; the fixed-point check only
        // applies to exact termination
        let fp_ok = prob.threshold.is_some() || violation <= 1e-9;
        row.verify = Some(fp_ok && counts_ok && gap <= 1e-9);
        row.residual = Some(violation.max(gap));
    }
    Ok(row)
}

fn run_pagerank_row(cfg: &RunConfig, variant: &Variant) -> Result<RunRow, String> {
    let prob = load_pagerank_problem(cfg)?;
    let run = run_pagerank_variant(&prob, variant, &opts_from(cfg), None)
        .map_err(|e| e.to_string())?;
    let mut row = RunRow {
        app: "pagerank".into(),
        variant: variant.name.clone(),
        partitions: cfg.partitions,
        workers: cfg.workers,
        sweeps: run.run.stats.sweeps,
        guards_fired: run.run.stats.guards_fired,
        state_changes: run.run.stats.state_changes,
        calc_ms: run.run.calc_seconds * 1e3,
        verify: None,
        residual: None,
        error: (run.run.termination == Termination::SweepBudgetExhausted)
            .then(|| "sweep budget exhausted".to_string()),
    };
    if cfg.verify {
        let want = oracle::oracle_power_iteration(&prob).map_err(|e| e.to_string())?;
        let linf = oracle::linf(&run.ranks, &want);
        row.verify = Some(linf <= 1e-6);
        row.residual = Some(linf);
    }
    Ok(row)
}

fn random_sparse(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparseMatrix {
    let data: Vec<f64> = (0..n * n)
        .map(|_| if rng.gen_bool(density) { rng.gen_range(-4i64..=4) as f64 } else { 0.0 })
        .collect();
    SparseMatrix::from_dense(n, n, &data)
}

fn run_matmul_row(cfg: &RunConfig, layout: Layout) -> Result<RunRow, String> {
    let n = cfg.gen_size;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = random_sparse(&mut rng, n, 0.3);
    let b = random_sparse(&mut rng, n, 0.3);
    let base = apps::build_matmul_spec(&a, &b).map_err(|e| e.to_string())?;
    let t0 = std::time::Instant::now();
    let (stats, result) = match layout {
        Layout::JaggedDiagonal => {
            let grouped = orthogonalize(orthogonalize(base, "j").map_err(|e| e.to_string())?, "i")
                .map_err(|e| e.to_string())?;
            let swapped = interchange(grouped, 1, 2).map_err(|e| e.to_string())?;
            let plan = concretize(materialize(swapped), Layout::JaggedDiagonal)
                .map_err(|e| e.to_string())?;
            let mut state = ExecutionState::new(&plan.program);
            apps::init_matmul(&a, &b, &mut state);
            let stats = plan.run_forelem(&mut state, &cfg.scheduler).map_err(|e| e.to_string())?;
            (stats, apps::matmul::read_result(&state, n, n))
        }
        _ => {
            let plan = concretize(materialize(base), layout).map_err(|e| e.to_string())?;
            let mut state = ExecutionState::new(&plan.program);
            apps::init_matmul(&a, &b, &mut state);
            let stats = plan.run_forelem(&mut state, &cfg.scheduler).map_err(|e| e.to_string())?;
            (stats, apps::matmul::read_result(&state, n, n))
        }
    };
    let calc_ms = t0.elapsed().as_secs_f64() * 1e3;
    let mut row = RunRow {
        app: "matmul".into(),
        variant: format!("matmul_{layout}"),
        partitions: 1,
        workers: 1,
        sweeps: 1,
        guards_fired: stats.guards_fired,
        state_changes: stats.state_changes,
        calc_ms,
        verify: None,
        residual: None,
        error: None,
    };
    if cfg.verify {
        let want = oracle::dense_matmul(&a.to_dense(), &b.to_dense(), n, n, n);
        let diff = oracle::linf(&result, &want);
        row.verify = Some(diff == 0.0);
        row.residual = Some(diff);
    }
    Ok(row)
}

fn run_sort_row(cfg: &RunConfig) -> Result<RunRow, String> {
    let n = cfg.gen_n.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1000i64..1000) as f64).collect();
    let program = apps::build_sort_spec(n, true).map_err(|e| e.to_string())?;
    let t0 = std::time::Instant::now();
    let mut state = ExecutionState::new(&program);
    apps::init_sort(&values, &mut state);
    let (sweeps, term) = run_whilelem(&program, &mut state, &cfg.scheduler, cfg.max_sweeps)
        .map_err(|e| e.to_string())?;
    let calc_ms = t0.elapsed().as_secs_f64() * 1e3;
    let sorted = state.space("A").scalar_contents();
    let mut row = RunRow {
        app: "sort".into(),
        variant: "sort_adjacent".into(),
        partitions: 1,
        workers: 1,
        sweeps: sweeps.len() as u64,
        guards_fired: sweeps.iter().map(|s| s.guards_fired).sum(),
        state_changes: sweeps.iter().map(|s| s.state_changes).sum(),
        calc_ms,
        verify: None,
        residual: None,
        error: (term == Termination::SweepBudgetExhausted)
            .then(|| "sweep budget exhausted".to_string()),
    };
    if cfg.verify {
        let inversions =
            sorted.windows(2).filter(|w| w[0] > w[1]).count() as f64;
        row.verify = Some(inversions == 0.0);
        row.residual = Some(inversions);
    }
    Ok(row)
}

fn rows_for(cfg: &RunConfig, extras: &[Variant]) -> Result<Vec<RunRow>, String> {
    match cfg.app {
        AppKind::KMeans | AppKind::PageRank => {
            let variant = variant_by_name(&cfg.variant, extras)
                .ok_or_else(|| format!("unknown variant `{}`", cfg.variant))?;
            if variant.app != cfg.app {
                return Err(format!("variant `{}` belongs to {}", variant.name, variant.app));
            }
            let row = match cfg.app {
                AppKind::KMeans => run_kmeans_row(cfg, &variant)?,
                _ => run_pagerank_row(cfg, &variant)?,
            };
            Ok(vec![row])
        }
        AppKind::Matmul => {
            cfg.layouts.iter().map(|&l| run_matmul_row(cfg, l)).collect()
        }
        AppKind::Sort => Ok(vec![run_sort_row(cfg)?]),
    }
}

/// Runs one configuration, printing and optionally writing CSV rows.
pub fn cmd_run(cfg: &RunConfig) -> i32 {
    let extras = match load_extra_variants(cfg.variants_file.as_deref()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let rows = match rows_for(cfg, &extras) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    println!("{CSV_HEADER}");
    for row in &rows {
        println!("{}", row.to_csv());
    }
    if let Err(e) = write_csv(cfg.csv.as_deref(), &rows, false) {
        eprintln!("error writing csv: {e}");
        return EXIT_USAGE;
    }
    if rows.iter().any(|r| r.error.is_some()) {
        EXIT_NO_TERMINATION
    } else if rows.iter().any(|r| r.verify == Some(false)) {
        EXIT_VERIFY_FAILED
    } else {
        EXIT_OK
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// Axes of an experiment grid; each is optional and multiplies the runs.
#[derive(Debug, Clone, Default)]
pub struct SweepGrid {
    pub variants: Vec<String>,
    pub workers: Vec<usize>,
    pub sizes: Vec<usize>,
    pub dims: Vec<usize>,
    pub ks: Vec<usize>,
}

/// Cartesian-product runs; per-cell failures land in the CSV error column
/// and do not stop the sweep.
pub fn cmd_sweep(cfg: &RunConfig, grid: &SweepGrid) -> i32 {
    let extras = match load_extra_variants(cfg.variants_file.as_deref()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let variants = if grid.variants.is_empty() {
        vec![cfg.variant.clone()]
    } else {
        grid.variants.clone()
    };
    let one_or = |v: &[usize], d: usize| if v.is_empty() { vec![d] } else { v.to_vec() };
    let workers = one_or(&grid.workers, cfg.workers);
    let sizes = one_or(&grid.sizes, match cfg.app {
        AppKind::KMeans => cfg.gen_n,
        AppKind::PageRank => cfg.gen_scale as usize,
        AppKind::Matmul => cfg.gen_size,
        AppKind::Sort => cfg.gen_n,
    });
    let dims = one_or(&grid.dims, cfg.gen_dim);
    let ks = one_or(&grid.ks, cfg.gen_k);

    let mut rows = Vec::new();
    println!("{CSV_HEADER},error");
    for variant in &variants {
        for &w in &workers {
            for &size in &sizes {
                for &dim in &dims {
                    for &k in &ks {
                        let mut cell = cfg.clone();
                        cell.variant = variant.clone();
                        cell.workers = w;
                        cell.gen_dim = dim;
                        cell.gen_k = k;
                        match cfg.app {
                            AppKind::KMeans | AppKind::Sort => cell.gen_n = size,
                            AppKind::PageRank => cell.gen_scale = size as u32,
                            AppKind::Matmul => cell.gen_size = size,
                        }
                        let produced = rows_for(&cell, &extras).unwrap_or_else(|e| {
                            vec![RunRow {
                                app: cfg.app.to_string(),
                                variant: variant.clone(),
                                partitions: cell.partitions,
                                workers: w,
                                sweeps: 0,
                                guards_fired: 0,
                                state_changes: 0,
                                calc_ms: 0.0,
                                verify: None,
                                residual: None,
                                error: Some(e),
                            }]
                        });
                        for row in produced {
                            println!("{},{}", row.to_csv(), row.error.clone().unwrap_or_default());
                            rows.push(row);
                        }
                    }
                }
            }
        }
    }
    if let Err(e) = write_csv(cfg.csv.as_deref(), &rows, true) {
        eprintln!("error writing csv: {e}");
        return EXIT_USAGE;
    }
    EXIT_OK
}

// ---------------------------------------------------------------------------
// list-variants
// ---------------------------------------------------------------------------

pub fn cmd_list_variants(variants_file: Option<&Path>) -> i32 {
    let extras = match load_extra_variants(variants_file) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    println!("{:<14} {:<9} {:<9} {:<7} pipeline", "name", "app", "exchange", "layout");
    for v in builtin_variants().iter().chain(extras.iter()) {
        println!(
            "{:<14} {:<9} {:<9} {:<7} {}",
            v.name,
            v.app.to_string(),
            v.exchange.to_string(),
            v.layout.to_string(),
            v.pipeline_display()
        );
    }
    EXIT_OK
}

//! Command-line front end: generate inputs, run variants against oracles,
//! sweep experiment grids, and list the variant catalog.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use forelem::cli::{self, RunConfig, SweepGrid};
use forelem::executor::Scheduler;
use forelem::transforms::{AppKind, Layout};

#[derive(Parser)]
#[command(name = "forelem", version, about = "Tuple-reservoir loop programs: generate, run, verify, benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate input files.
    Generate {
        #[command(subcommand)]
        what: GenerateWhat,
    },
    /// Run one variant, optionally verifying against the matching oracle.
    Run(RunArgs),
    /// Cartesian-product experiment grid, one CSV row per cell.
    Sweep(SweepArgs),
    /// List built-in and user-defined variants with their pipelines.
    ListVariants {
        /// TOML file with additional variant definitions.
        #[arg(long)]
        variants_file: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenerateWhat {
    /// Clustered points for k-means (ASCII, one point per line).
    Kmeans {
        #[arg(long, default_value_t = 1 << 12)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, env = "FORELEM_SEED", default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "points.txt")]
        out: PathBuf,
    },
    /// Scale-free directed graph (ASCII, one `u v` edge per line).
    Graph {
        /// log2 of the vertex count.
        #[arg(long, default_value_t = 10)]
        scale: u32,
        #[arg(long, default_value_t = 8)]
        edge_factor: usize,
        /// Keep vertices without out-edges instead of adding rescue edges.
        #[arg(long)]
        keep_dangling: bool,
        #[arg(long, env = "FORELEM_SEED", default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "edges.txt")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CommonRunArgs {
    /// Application: kmeans | pagerank | matmul | sort.
    #[arg(long)]
    app: String,
    /// Variant name (see list-variants).
    #[arg(long, default_value = "")]
    variant: String,
    /// Input file (points or edges); generated per seed when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generated point/array count.
    #[arg(long, default_value_t = 1 << 12)]
    gen_n: usize,
    #[arg(long, default_value_t = 4)]
    gen_dim: usize,
    #[arg(long, default_value_t = 4)]
    gen_k: usize,
    /// Generated graph scale (log2 vertices).
    #[arg(long, default_value_t = 10)]
    gen_scale: u32,
    #[arg(long, default_value_t = 8)]
    gen_edge_factor: usize,
    /// Generated matrix size.
    #[arg(long, default_value_t = 32)]
    gen_size: usize,
    #[arg(long, short = 'p', default_value_t = 4)]
    partitions: usize,
    #[arg(long, short = 'w', default_value_t = 2)]
    workers: usize,
    #[arg(long, default_value_t = 1)]
    sweeps_per_exchange: u32,
    /// Guard tolerance for pagerank.
    #[arg(long, default_value_t = 1e-10)]
    epsilon: f64,
    /// k-means guard margin (a move must improve by more than this).
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// k-means early stop: fraction of points switched per round.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, env = "FORELEM_SEED", default_value_t = 1)]
    seed: u64,
    /// Verify against the matching oracle; exit 2 on failure.
    #[arg(long)]
    verify: bool,
    /// Write rows to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    max_sweeps: u64,
    /// Matmul layouts to run (comma-separated: aos,soa,jagged).
    #[arg(long, value_delimiter = ',', default_values_t = vec!["aos".to_string()])]
    layout: Vec<String>,
    /// Tuple scheduler: in-order | shuffled | random.
    #[arg(long, default_value = "in-order")]
    scheduler: String,
    /// Batch size for the random scheduler.
    #[arg(long, default_value_t = 1024)]
    batch: usize,
    /// TOML file with additional variant definitions.
    #[arg(long)]
    variants_file: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonRunArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonRunArgs,
    /// Variants to sweep (comma-separated).
    #[arg(long, value_delimiter = ',')]
    grid_variants: Vec<String>,
    /// Worker counts to sweep.
    #[arg(long, value_delimiter = ',')]
    grid_workers: Vec<usize>,
    /// Input sizes to sweep (points / scale / matrix size by app).
    #[arg(long, value_delimiter = ',')]
    grid_sizes: Vec<usize>,
    /// Point dimensions to sweep.
    #[arg(long, value_delimiter = ',')]
    grid_dims: Vec<usize>,
    /// Cluster counts to sweep.
    #[arg(long, value_delimiter = ',')]
    grid_k: Vec<usize>,
}

fn parse_layouts(names: &[String]) -> Result<Vec<Layout>, String> {
    names
        .iter()
        .map(|s| match s.as_str() {
            "aos" => Ok(Layout::Aos),
            "soa" => Ok(Layout::Soa),
            "jagged" => Ok(Layout::JaggedDiagonal),
            other => Err(format!("unknown layout `{other}`")),
        })
        .collect()
}

fn build_config(c: &CommonRunArgs) -> Result<RunConfig, String> {
    let app: AppKind = c.app.parse()?;
    let scheduler = match c.scheduler.as_str() {
        "in-order" => Scheduler::SweepInOrder,
        "shuffled" => Scheduler::SweepShuffled { seed: c.seed },
        "random" => Scheduler::RandomWithReplacement { seed: c.seed, batch: c.batch },
        other => return Err(format!("unknown scheduler `{other}`")),
    };
    let variant = if c.variant.is_empty() {
        match app {
            AppKind::KMeans => "Kmeans_4".to_string(),
            AppKind::PageRank => "PageRank_2".to_string(),
            _ => String::new(),
        }
    } else {
        c.variant.clone()
    };
    Ok(RunConfig {
        app,
        variant,
        input: c.input.clone(),
        gen_n: c.gen_n,
        gen_dim: c.gen_dim,
        gen_k: c.gen_k,
        gen_scale: c.gen_scale,
        gen_edge_factor: c.gen_edge_factor,
        gen_size: c.gen_size,
        partitions: c.partitions,
        workers: c.workers,
        sweeps_per_exchange: c.sweeps_per_exchange,
        epsilon: c.epsilon,
        convergence_delta: c.delta,
        threshold: c.threshold,
        seed: c.seed,
        verify: c.verify,
        csv: c.csv.clone(),
        max_sweeps: c.max_sweeps,
        layouts: parse_layouts(&c.layout)?,
        scheduler,
        variants_file: c.variants_file.clone(),
    })
}

fn main() {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Generate { what } => match what {
            GenerateWhat::Kmeans { n, dim, k, seed, out } => {
                cli::cmd_generate_points(*n, *dim, *k, *seed, out)
            }
            GenerateWhat::Graph { scale, edge_factor, keep_dangling, seed, out } => {
                cli::cmd_generate_graph(*scale, *edge_factor, *seed, *keep_dangling, out)
            }
        }
        .unwrap_or_else(|e| {
            eprintln!("error: {e}");
            cli::EXIT_USAGE
        }),
        Command::Run(args) => match build_config(&args.common) {
            Ok(cfg) => cli::cmd_run(&cfg),
            Err(e) => {
                eprintln!("error: {e}");
                cli::EXIT_USAGE
            }
        },
        Command::Sweep(args) => match build_config(&args.common) {
            Ok(cfg) => {
                let grid = SweepGrid {
                    variants: args.grid_variants.clone(),
                    workers: args.grid_workers.clone(),
                    sizes: args.grid_sizes.clone(),
                    dims: args.grid_dims.clone(),
                    ks: args.grid_k.clone(),
                };
                cli::cmd_sweep(&cfg, &grid)
            }
            Err(e) => {
                eprintln!("error: {e}");
                cli::EXIT_USAGE
            }
        },
        Command::ListVariants { variants_file } => {
            cli::cmd_list_variants(variants_file.as_deref())
        }
    };
    std::process::exit(code);
}

//! High-level runs: compose a variant, derive its exchange policies, execute
//! partitioned, and gather the results for verification.

use std::time::Instant;

use crate::exchange::{
    DataSource, ExchangePolicies, ExchangeScheme, IndirectAssertion, WirePolicy,
};
use crate::executor::{
    merge_partition_states, run_partitioned, ExchangeObserver, ExecutionState, PartitionSpec,
    PartitionedOutcome, RunStats, Scheduler, Termination,
};
use crate::ir::Program;
use crate::transforms::{compose, AppKind, Composed, ExchangeKind, TransformError, Variant};

use super::kmeans::{build_kmeans_spec, init_kmeans, KMeansProblem};
use super::pagerank::{build_pagerank_spec, init_pagerank, PageRankProblem};
use super::AppError;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub partitions: usize,
    pub workers: usize,
    pub sweeps_per_exchange: u32,
    pub max_rounds: u64,
    pub scheduler: Scheduler,
    /// Overrides the variant's exchange scheme (used to cross variants with
    /// schemes without redefining them).
    pub exchange_override: Option<ExchangeKind>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            partitions: 1,
            workers: 1,
            sweeps_per_exchange: 1,
            max_rounds: 100_000,
            scheduler: Scheduler::SweepInOrder,
            exchange_override: None,
        }
    }
}

pub struct AppRun {
    pub outcome: PartitionedOutcome,
    pub termination: Termination,
    pub stats: RunStats,
    /// Wall time of initialization + composition + execution (excludes
    /// program construction and any I/O).
    pub calc_seconds: f64,
}

fn space_id(program: &Program, name: &str) -> Option<u32> {
    program.spaces.iter().position(|s| s.name == name).map(|i| i as u32)
}

/// Wire policies for the k-means spaces under a given scheme. The sum/size
/// statistics travel as additive deltas under the buffered and master
/// schemes; the indirect scheme exchanges the authoritative assignments
/// instead and recomputes the statistics everywhere.
fn kmeans_policies(
    program: &Program,
    scheme: ExchangeKind,
    split: Option<&crate::transforms::SplitInfo>,
) -> ExchangePolicies {
    let mut p = ExchangePolicies::local_only(program.spaces.len());
    match scheme {
        ExchangeKind::Buffered | ExchangeKind::Master => {
            if let Some(id) = space_id(program, "M_SUM") {
                p.set(id, WirePolicy::Accumulate { count_like: false });
            }
            if let Some(id) = space_id(program, "M_SIZE") {
                p.set(id, WirePolicy::Accumulate { count_like: true });
            }
        }
        ExchangeKind::Indirect => {
            if let Some(id) = space_id(program, "M_SUM") {
                p.set(id, WirePolicy::Recompute);
            }
            if let Some(id) = space_id(program, "M_SIZE") {
                p.set(id, WirePolicy::Recompute);
            }
            if let Some(id) = space_id(program, "M") {
                p.set(id, WirePolicy::OwnerOverwrite);
                if let Some(info) = split {
                    p.set_owner_map(id, info.owners.clone());
                }
            }
        }
    }
    // keep an ownership record for merging even when M stays local
    if !matches!(scheme, ExchangeKind::Indirect) {
        if let (Some(id), Some(info)) = (space_id(program, "M"), split) {
            p.set_owner_map(id, info.owners.clone());
        }
    }
    p
}

fn kmeans_assertions(program: &Program, localized: bool) -> Vec<IndirectAssertion> {
    let groups = program.space("M_SIZE").map(|d| d.bounds[0]).unwrap_or(0);
    vec![IndirectAssertion {
        derived_size: "M_SIZE".into(),
        derived_sum: Some("M_SUM".into()),
        assignment: if localized {
            DataSource::CellField("c_x".into())
        } else {
            DataSource::Space("M".into())
        },
        coords: Some(if localized {
            DataSource::CellField("c".into())
        } else {
            DataSource::Space("COORDS".into())
        }),
        groups,
    }]
}

/// PageRank: ranks travel as additive deltas; the per-edge memory is always
/// partition-local.
fn pagerank_policies(
    program: &Program,
    split: Option<&crate::transforms::SplitInfo>,
) -> ExchangePolicies {
    let mut p = ExchangePolicies::local_only(program.spaces.len());
    if let Some(id) = space_id(program, "PR") {
        p.set(id, WirePolicy::Accumulate { count_like: false });
        if let Some(info) = split {
            if info.field == "v" {
                p.set_owner_map(id, info.owners.clone());
            }
        }
    }
    p
}

fn scheme_for(
    kind: ExchangeKind,
    app: AppKind,
    program: &Program,
    localized: bool,
) -> Result<ExchangeScheme, AppError> {
    Ok(match kind {
        ExchangeKind::Buffered => ExchangeScheme::Buffered,
        ExchangeKind::Master => ExchangeScheme::Master { master: 0 },
        ExchangeKind::Indirect => match app {
            AppKind::KMeans => {
                ExchangeScheme::Indirect { assertions: kmeans_assertions(program, localized) }
            }
            _ => {
                return Err(AppError::InvalidProblem(format!(
                    "indirect exchange is not defined for {app}"
                )))
            }
        },
    })
}

fn compose_variant(
    base: Program,
    variant: &Variant,
    partitions: usize,
) -> Result<Composed, TransformError> {
    compose(base, &variant.pipeline, partitions)
}

pub struct KMeansRun {
    pub run: AppRun,
    pub assignments: Vec<u64>,
    pub sums: Vec<f64>,
    pub sizes: Vec<f64>,
    pub dim: usize,
}

fn phase(label: &str, t: &mut Instant) {
    if std::env::var_os("FORELEM_PHASE_TIMING").is_some() {
        eprintln!("[phase] {label}: {:.1} ms", t.elapsed().as_secs_f64() * 1e3);
    }
    *t = Instant::now();
}

pub fn run_kmeans_variant(
    prob: &KMeansProblem,
    variant: &Variant,
    opts: &RunOptions,
    observer: Option<&mut dyn ExchangeObserver>,
) -> Result<KMeansRun, AppError> {
    let program = build_kmeans_spec(prob);
    let t0 = Instant::now();
    let mut tp = Instant::now();
    let mut base_state = ExecutionState::new(&program);
    init_kmeans(prob, &mut base_state);
    phase("init", &mut tp);

    let composed = compose_variant(program, variant, opts.partitions)?;
    phase("compose", &mut tp);
    let localized = composed.partitions[0].localized_field("c_x").is_some();
    let scheme_kind = opts.exchange_override.unwrap_or(variant.exchange);
    let scheme = scheme_for(scheme_kind, AppKind::KMeans, &composed.partitions[0], localized)?;
    let policies = kmeans_policies(&composed.partitions[0], scheme_kind, composed.split.as_ref());

    let early_stop = prob.threshold.map(|t| (t * prob.n as f64) as u64);
    let outcome = run_partitioned(
        &base_state,
        PartitionSpec {
            programs: composed.partitions,
            scheme,
            policies,
            workers: opts.workers,
            sweeps_per_exchange: opts.sweeps_per_exchange,
            max_rounds: opts.max_rounds,
            scheduler: opts.scheduler.clone(),
            observer,
            early_stop_changes: early_stop,
        },
    )?;
    phase("run", &mut tp);
    let calc_seconds = t0.elapsed().as_secs_f64();

    let merged = merge_partition_states(&outcome);
    let assignments: Vec<u64> = if localized {
        merged.index_cells("c_x", prob.n)
    } else {
        merged.scalar_space("M").iter().map(|&v| v as u64).collect()
    };
    let (_, sums) = merged.vector_space("M_SUM");
    let sizes = merged.scalar_space("M_SIZE");
    let termination = outcome.termination;
    let stats = outcome.stats.clone();
    Ok(KMeansRun {
        run: AppRun { outcome, termination, stats, calc_seconds },
        assignments,
        sums,
        sizes,
        dim: prob.dim,
    })
}

pub struct PageRankRun {
    pub run: AppRun,
    pub ranks: Vec<f64>,
}

pub fn run_pagerank_variant(
    prob: &PageRankProblem,
    variant: &Variant,
    opts: &RunOptions,
    observer: Option<&mut dyn ExchangeObserver>,
) -> Result<PageRankRun, AppError> {
    // reduction pipelines start from the expanded form too; the reduce step
    // compacts it
    let program = build_pagerank_spec(prob);
    let t0 = Instant::now();
    let mut base_state = ExecutionState::new(&program);
    init_pagerank(prob, &mut base_state);

    let composed = compose_variant(program, variant, opts.partitions)?;
    let scheme_kind = opts.exchange_override.unwrap_or(variant.exchange);
    let scheme = scheme_for(scheme_kind, AppKind::PageRank, &composed.partitions[0], false)?;
    let policies = pagerank_policies(&composed.partitions[0], composed.split.as_ref());

    let outcome = run_partitioned(
        &base_state,
        PartitionSpec {
            programs: composed.partitions,
            scheme,
            policies,
            workers: opts.workers,
            sweeps_per_exchange: opts.sweeps_per_exchange,
            max_rounds: opts.max_rounds,
            scheduler: opts.scheduler.clone(),
            observer,
            early_stop_changes: None,
        },
    )?;
    let calc_seconds = t0.elapsed().as_secs_f64();

    let ranks = merge_partition_states(&outcome).scalar_space("PR");
    let termination = outcome.termination;
    let stats = outcome.stats.clone();
    Ok(PageRankRun { run: AppRun { outcome, termination, stats, calc_seconds }, ranks })
}

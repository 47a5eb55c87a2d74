//! Partitioned parallel execution.
//!
//! Each partition owns a replica of the shared spaces and sweeps its own
//! sub-reservoir; a worker pool runs partitions concurrently. After a fixed
//! number of local sweeps the exchange scheme reconciles replicas. The run
//! terminates when a full round changes nothing anywhere and the exchange
//! moves nothing. Results are deterministic for a given seed regardless of
//! the worker count: partition sweeps are seeded per partition and deltas are
//! applied in partition order, key-sorted.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::exchange::{
    flush_buffered, flush_indirect, flush_master, Delta, ExchangePolicies, ExchangeScheme,
    ExchangeStats, UpdateBuffer, WirePolicy,
};
use crate::ir::Program;

use super::exec::{run_pass, DeltaSink, SweepCtx};
use super::link::LinkedPlan;
use super::state::{CellData, ExecutionState};
use super::{ExecError, Scheduler, SweepStats, Termination};

/// Aggregate counters for a partitioned run.
#[derive(Debug, Clone)]
pub struct RunStats {
    pub partitions: usize,
    pub workers: usize,
    pub rounds: u64,
    pub sweeps: u64,
    pub guards_fired: u64,
    pub state_changes: u64,
    pub wall: Duration,
    pub exchange: ExchangeStats,
}

impl RunStats {
    pub fn csv_header() -> &'static str {
        "variant,partitions,workers,sweeps,guards_fired,state_changes,wall_ms,deltas_sent,keys_touched,bytes_equivalent"
    }

    pub fn csv_row(&self, variant: &str) -> String {
        format!(
            "{},{},{},{},{},{},{:.3},{},{},{}",
            variant,
            self.partitions,
            self.workers,
            self.sweeps,
            self.guards_fired,
            self.state_changes,
            self.wall.as_secs_f64() * 1e3,
            self.exchange.deltas_sent,
            self.exchange.keys_touched,
            self.exchange.bytes_equivalent,
        )
    }
}

/// Test hook called at every exchange point, after reconciliation.
pub trait ExchangeObserver {
    fn at_exchange(&mut self, _round: u64, _states: &[ExecutionState]) {}
}

/// Inputs to a partitioned run.
pub struct PartitionSpec<'a> {
    pub programs: Vec<Program>,
    pub scheme: ExchangeScheme,
    pub policies: ExchangePolicies,
    pub workers: usize,
    pub sweeps_per_exchange: u32,
    pub max_rounds: u64,
    pub scheduler: Scheduler,
    pub observer: Option<&'a mut dyn ExchangeObserver>,
    /// Optional threshold-style early stop: a round whose total state
    /// changes do not exceed this count terminates the run.
    pub early_stop_changes: Option<u64>,
}

pub struct PartitionedOutcome {
    pub plans: Vec<LinkedPlan>,
    pub states: Vec<ExecutionState>,
    pub policies: ExchangePolicies,
    pub stats: RunStats,
    pub termination: Termination,
    pub sweep_log: Vec<Vec<SweepStats>>,
}

struct PartitionSink<'a> {
    buffer: &'a mut UpdateBuffer,
    policies: &'a ExchangePolicies,
    space_names: &'a [String],
}

impl<'a> DeltaSink for PartitionSink<'a> {
    fn on_add(&mut self, space: u32, key: &[u64], delta: &[f64]) -> Result<(), ExecError> {
        match self.policies.policy(space) {
            WirePolicy::Local | WirePolicy::Recompute => Ok(()),
            WirePolicy::Accumulate { count_like } => {
                let d = if *count_like {
                    debug_assert_eq!(delta.len(), 1);
                    debug_assert_eq!(delta[0].fract(), 0.0);
                    Delta::AddCount(delta[0] as i64)
                } else if delta.len() == 1 {
                    Delta::AddScalar(delta[0])
                } else {
                    Delta::AddVector(delta.into())
                };
                self.buffer
                    .record_delta(space, &self.space_names[space as usize], key, d, self.policies)
                    .map_err(ExecError::Exchange)
            }
            WirePolicy::OwnerOverwrite => Err(ExecError::Exchange(
                crate::exchange::ExchangeError::PolicyViolation(
                    self.space_names[space as usize].clone(),
                ),
            )),
        }
    }

    fn on_set(&mut self, space: u32, key: &[u64], value: &[f64]) -> Result<(), ExecError> {
        match self.policies.policy(space) {
            WirePolicy::Local | WirePolicy::Recompute => Ok(()),
            WirePolicy::OwnerOverwrite => self
                .buffer
                .record_delta(
                    space,
                    &self.space_names[space as usize],
                    key,
                    Delta::Overwrite(value.into()),
                    self.policies,
                )
                .map_err(ExecError::Exchange),
            WirePolicy::Accumulate { .. } => Err(ExecError::Exchange(
                crate::exchange::ExchangeError::PolicyViolation(
                    self.space_names[space as usize].clone(),
                ),
            )),
        }
    }
}

fn partition_scheduler(base: &Scheduler, pid: u64) -> Scheduler {
    let mix = pid.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    match base {
        Scheduler::SweepInOrder => Scheduler::SweepInOrder,
        Scheduler::SweepShuffled { seed } => {
            Scheduler::SweepShuffled { seed: seed.wrapping_add(mix) }
        }
        Scheduler::RandomWithReplacement { seed, batch } => {
            Scheduler::RandomWithReplacement { seed: seed.wrapping_add(mix), batch: *batch }
        }
    }
}

/// Runs the partition programs to global termination.
pub fn run_partitioned(
    base_state: &ExecutionState,
    mut spec: PartitionSpec<'_>,
) -> Result<PartitionedOutcome, ExecError> {
    assert!(spec.workers >= 1, "workers >= 1");
    let sweeps_per_exchange = spec.sweeps_per_exchange.max(1);
    let start = Instant::now();

    let programs: Vec<Program> = spec.programs.drain(..).collect();
    let setup: Vec<(ExecutionState, LinkedPlan)> = programs
        .into_par_iter()
        .map(|program| {
            let state = ExecutionState::derive(&program, base_state);
            let plan = LinkedPlan::new(program)?;
            Ok((state, plan))
        })
        .collect::<Result<_, ExecError>>()?;
    let mut plans = Vec::new();
    let mut states = Vec::new();
    let mut buffers = Vec::new();
    let mut scheds = Vec::new();
    for (pid, (state, plan)) in setup.into_iter().enumerate() {
        states.push(state);
        plans.push(plan);
        buffers.push(UpdateBuffer::new(pid as u32));
        scheds.push(partition_scheduler(&spec.scheduler, pid as u64));
    }
    if std::env::var_os("FORELEM_PHASE_TIMING").is_some() {
        eprintln!("[phase] partition setup: {:.1} ms", start.elapsed().as_secs_f64() * 1e3);
    }
    let n_parts = plans.len();
    let space_names: Vec<String> =
        plans[0].program.spaces.iter().map(|s| s.name.clone()).collect();
    let mut sweep_log: Vec<Vec<SweepStats>> = vec![Vec::new(); n_parts];

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .expect("worker pool");

    let mut stats = RunStats {
        partitions: n_parts,
        workers: spec.workers,
        rounds: 0,
        sweeps: 0,
        guards_fired: 0,
        state_changes: 0,
        wall: Duration::ZERO,
        exchange: ExchangeStats::default(),
    };
    let mut termination = Termination::SweepBudgetExhausted;

    for round in 0..spec.max_rounds {
        stats.rounds = round + 1;
        let policies = &spec.policies;
        let names = &space_names;
        let round_logs: Vec<Vec<SweepStats>> = pool.install(|| {
            states
                .par_iter_mut()
                .zip(buffers.par_iter_mut())
                .zip(plans.par_iter().zip(scheds.par_iter()))
                .map(|((state, buffer), (plan, sched))| {
                    let mut log = Vec::new();
                    for s in 0..sweeps_per_exchange {
                        let pass_no = round * sweeps_per_exchange as u64 + s as u64;
                        let (order, _) = sched.pass_order(pass_no, plan.top_len());
                        let mut sink = PartitionSink { buffer, policies, space_names: names };
                        let mut sctx =
                            SweepCtx { sink: Some(&mut sink), observer: None, dry: false };
                        let sw = run_pass(plan, state, &order, &mut sctx)?;
                        buffer.sweeps_since_flush += 1;
                        let quiet = sw.state_changes == 0;
                        log.push(sw);
                        if quiet {
                            break;
                        }
                    }
                    Ok(log)
                })
                .collect::<Result<Vec<_>, ExecError>>()
        })?;

        let local_changes: u64 = round_logs
            .iter()
            .flat_map(|log| log.iter().map(|s| s.state_changes))
            .sum();
        for (log, round_log) in sweep_log.iter_mut().zip(round_logs) {
            log.extend(round_log);
        }

        let exchanged = match &spec.scheme {
            ExchangeScheme::Buffered => {
                flush_buffered(&mut buffers, &mut states, &mut stats.exchange)
            }
            ExchangeScheme::Master { master } => {
                flush_master(&mut buffers, &mut states, *master, &mut stats.exchange)
            }
            ExchangeScheme::Indirect { assertions } => {
                let a = flush_buffered(&mut buffers, &mut states, &mut stats.exchange);
                let b = flush_indirect(assertions, &mut states, &mut stats.exchange)
                    .map_err(ExecError::Exchange)?;
                a || b
            }
        };

        if let Some(obs) = spec.observer.as_mut() {
            obs.at_exchange(round, &states);
        }

        if local_changes == 0 && !exchanged {
            termination = Termination::Terminated;
            break;
        }
        if let Some(limit) = spec.early_stop_changes {
            if local_changes <= limit {
                termination = Termination::Terminated;
                break;
            }
        }
    }

    for log in &sweep_log {
        for sw in log {
            stats.sweeps += 1;
            stats.guards_fired += sw.guards_fired;
            stats.state_changes += sw.state_changes;
        }
    }
    stats.wall = start.elapsed();

    Ok(PartitionedOutcome {
        plans,
        states,
        policies: spec.policies,
        stats,
        termination,
        sweep_log,
    })
}

/// Gathers a merged view of partition-scattered data for verification.
pub fn merge_partition_states(outcome: &PartitionedOutcome) -> MergedView<'_> {
    MergedView { outcome }
}

pub struct MergedView<'a> {
    outcome: &'a PartitionedOutcome,
}

impl<'a> MergedView<'a> {
    /// Scalar space contents. Keys with an ownership map come from their
    /// owner's replica; fully replicated spaces come from replica 0.
    pub fn scalar_space(&self, name: &str) -> Vec<f64> {
        let states = &self.outcome.states;
        let id = states[0].space_id(name).unwrap_or_else(|| panic!("unknown space `{name}`"));
        let base = states[0].space_at(id).scalar_contents();
        match self.outcome.policies.owner_map(id) {
            Some(owners) => (0..base.len())
                .map(|k| {
                    // keys beyond the observed field values were never split
                    // anywhere; any replica agrees on them
                    let owner = owners.get(k).map_or(0, |&o| o as usize);
                    states[owner].space_at(id).read(&[k as u64])[0]
                })
                .collect(),
            None => base,
        }
    }

    pub fn vector_space(&self, name: &str) -> (usize, Vec<f64>) {
        self.outcome.states[0].space(name).vector_contents()
    }

    /// Localized index-valued cells gathered across partitions into a dense
    /// vector indexed by cell key (integral scalar cells coerce).
    pub fn index_cells(&self, field: &str, bound: usize) -> Vec<u64> {
        let mut out = vec![0u64; bound];
        for state in &self.outcome.states {
            if let Some(cells) = state.cell_store(field) {
                match &cells.data {
                    CellData::Index(data) => {
                        for (i, &k) in cells.keys.iter().enumerate() {
                            out[k as usize] = data[i];
                        }
                    }
                    CellData::Scalar(data) => {
                        for (i, &k) in cells.keys.iter().enumerate() {
                            out[k as usize] = data[i] as u64;
                        }
                    }
                    CellData::Vector { .. } => panic!("`{field}` is not index-valued"),
                }
            }
        }
        out
    }

    /// Localized scalar cells gathered across partitions.
    pub fn scalar_cells(&self, field: &str, bound: usize) -> Vec<f64> {
        let mut out = vec![0.0; bound];
        for state in &self.outcome.states {
            if let Some(cells) = state.cell_store(field) {
                if let CellData::Scalar(data) = &cells.data {
                    for (i, &k) in cells.keys.iter().enumerate() {
                        out[k as usize] = data[i];
                    }
                }
            }
        }
        out
    }

    /// Localized vector cells gathered across partitions.
    pub fn vector_cells(&self, field: &str, bound: usize) -> (usize, Vec<f64>) {
        let mut dim = 0;
        for state in &self.outcome.states {
            if let Some(cells) = state.cell_store(field) {
                if let CellData::Vector { dim: d, .. } = &cells.data {
                    dim = *d;
                }
            }
        }
        let mut out = vec![0.0; bound * dim];
        for state in &self.outcome.states {
            if let Some(cells) = state.cell_store(field) {
                if let CellData::Vector { dim: d, data } = &cells.data {
                    for (i, &k) in cells.keys.iter().enumerate() {
                        out[k as usize * d..(k as usize + 1) * d]
                            .copy_from_slice(&data[i * d..(i + 1) * d]);
                    }
                }
            }
        }
        (dim, out)
    }
}

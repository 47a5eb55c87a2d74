//! Sweep execution: guarded atomic blocks over scheduled tuple visits.
//!
//! Block semantics: the guard is evaluated against the current state; when it
//! fires, every key and right-hand side in the block is evaluated against the
//! state at block entry, then all writes are applied together. A divide by
//! zero aborts the block with nothing applied.

use std::time::{Duration, Instant};

use smallvec::SmallVec;

use crate::ir::{Expr, Key, Program, Tuple, Value, WriteOp};

use super::eval::{RowCtx, Val};
use super::link::{LStmt, LinkedPlan, NestShape};
use super::state::{CellData, ExecutionState};
use super::{ExecError, Scheduler, SweepStats, Termination};

/// One applied (or would-be, in dry mode) state change.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeEntry {
    /// Space name, or localized field name prefixed with `.`.
    pub target: String,
    pub key: Vec<u64>,
    pub old: Value,
    pub new: Value,
}

pub type ChangeRecord = Vec<ChangeEntry>;

/// Receives the per-write deltas of exchanged spaces during partitioned runs.
pub trait DeltaSink {
    fn on_add(&mut self, space: u32, key: &[u64], delta: &[f64]) -> Result<(), ExecError>;
    fn on_set(&mut self, space: u32, key: &[u64], value: &[f64]) -> Result<(), ExecError>;
}

/// Test and instrumentation hooks into a sweep.
pub trait SweepObserver {
    fn on_visit(&mut self, _tuple: &Tuple) {}
    fn on_applied(&mut self, _state: &ExecutionState, _record: &ChangeRecord) {}
    /// Expansion of a compacted tuple family: `(family key, enumerated member)`.
    fn on_expand(&mut self, _family: u64, _member: u64) {}
}

enum StagedWrite {
    Space { space: u32, key: Key, op: WriteOp, val: SmallVec<[f64; 4]> },
    Cell { cf: u32, cell: u32, val: StagedCell },
}

enum StagedCell {
    I(u64),
    S(f64),
    V(SmallVec<[f64; 4]>),
}

pub(crate) struct SweepCtx<'a> {
    pub sink: Option<&'a mut dyn DeltaSink>,
    pub observer: Option<&'a mut dyn SweepObserver>,
    pub dry: bool,
}

impl<'a> SweepCtx<'a> {
    pub fn plain() -> SweepCtx<'static> {
        SweepCtx { sink: None, observer: None, dry: false }
    }
}

fn stage_val(v: Val) -> SmallVec<[f64; 4]> {
    match v {
        Val::I(x) => SmallVec::from_slice(&[x as f64]),
        Val::S(x) => SmallVec::from_slice(&[x]),
        Val::V(s) => SmallVec::from_slice(s),
        Val::VO(s) => SmallVec::from_slice(&s),
        Val::B(_) => panic!("boolean staged as value"),
    }
}

fn stage_stmts(
    plan: &LinkedPlan,
    state: &ExecutionState,
    row: usize,
    binders: &mut SmallVec<[u64; 4]>,
    stmts: &[LStmt],
    out: &mut Vec<StagedWrite>,
    expansions: &mut Vec<(u64, u64)>,
) -> Result<(), ExecError> {
    for stmt in stmts {
        match stmt {
            LStmt::Write { space, keys, op, value } => {
                let ctx = RowCtx {
                    state,
                    store: &plan.store,
                    cell_maps: &plan.cell_maps,
                    row,
                    binders,
                    epsilon: plan.epsilon,
                };
                let key = ctx.eval_key(keys)?;
                let val = stage_val(ctx.eval(value)?);
                out.push(StagedWrite::Space { space: *space, key, op: op.clone(), val });
            }
            LStmt::CellWrite { cell, value } => {
                let ctx = RowCtx {
                    state,
                    store: &plan.store,
                    cell_maps: &plan.cell_maps,
                    row,
                    binders,
                    epsilon: plan.epsilon,
                };
                let val = match ctx.eval(value)? {
                    Val::I(x) => StagedCell::I(x),
                    Val::S(x) => StagedCell::S(x),
                    v @ (Val::V(_) | Val::VO(_)) => StagedCell::V(stage_val(v)),
                    Val::B(_) => panic!("boolean staged as value"),
                };
                let cell_id = plan.cell_maps.row_cell[*cell as usize][row];
                out.push(StagedWrite::Cell { cf: *cell, cell: cell_id, val });
            }
            LStmt::Range { binder_depth, len, except, body } => {
                let except_v = match except {
                    Some(e) => {
                        let ctx = RowCtx {
                            state,
                            store: &plan.store,
                            cell_maps: &plan.cell_maps,
                            row,
                            binders,
                            epsilon: plan.epsilon,
                        };
                        match ctx.eval(e)? {
                            Val::I(v) => Some(v),
                            Val::S(v) => Some(v as u64),
                            _ => return Err(ExecError::BadKey(f64::NAN)),
                        }
                    }
                    None => None,
                };
                debug_assert_eq!(*binder_depth as usize, binders.len());
                for w in 0..*len {
                    if Some(w) == except_v {
                        continue;
                    }
                    binders.push(w);
                    stage_stmts(plan, state, row, binders, body, out, expansions)?;
                    binders.pop();
                    if let Some(u) = except_v {
                        expansions.push((u, w));
                    }
                }
            }
        }
    }
    Ok(())
}

fn read_space_value(state: &ExecutionState, space: u32, key: &[u64]) -> Value {
    let store = state.space_at(space);
    let slice = store.read(key);
    if store.dim() == 1 {
        Value::Scalar(slice[0])
    } else {
        Value::vector(slice)
    }
}

fn apply_staged(
    plan: &LinkedPlan,
    state: &mut ExecutionState,
    staged: &[StagedWrite],
    ctx: &mut SweepCtx,
    record: Option<&mut ChangeRecord>,
) -> Result<bool, ExecError> {
    let mut changed_any = false;
    let mut record = record;
    for w in staged {
        match w {
            StagedWrite::Space { space, key, op, val } => {
                let old = record.as_ref().map(|_| read_space_value(state, *space, key));
                let mut delta_buf: SmallVec<[f64; 4]> = SmallVec::new();
                if matches!(op, WriteOp::Add) {
                    delta_buf.extend_from_slice(val);
                } else if matches!(op, WriteOp::Sub) {
                    delta_buf.extend(val.iter().map(|v| -v));
                }
                let is_add = !matches!(op, WriteOp::Set);
                let changed = if ctx.dry {
                    let current = state.space_at(*space).read(key);
                    if is_add {
                        current
                            .iter()
                            .zip(&delta_buf)
                            .any(|(c, d)| (c + d).to_bits() != c.to_bits())
                    } else {
                        current != val.as_slice()
                    }
                } else if is_add {
                    state.space_at_mut(*space).add(key, &delta_buf)
                } else {
                    state.space_at_mut(*space).write(key, val)
                };
                if changed {
                    changed_any = true;
                    if !ctx.dry {
                        if let Some(sink) = ctx.sink.as_mut() {
                            if is_add {
                                sink.on_add(*space, key, &delta_buf)?;
                            } else {
                                sink.on_set(*space, key, val)?;
                            }
                        }
                    }
                    if let Some(rec) = record.as_mut() {
                        let new = if ctx.dry {
                            if is_add {
                                let cur = state.space_at(*space).read(key);
                                let sum: SmallVec<[f64; 4]> =
                                    cur.iter().zip(&delta_buf).map(|(c, d)| c + d).collect();
                                if sum.len() == 1 {
                                    Value::Scalar(sum[0])
                                } else {
                                    Value::vector(&sum)
                                }
                            } else if val.len() == 1 {
                                Value::Scalar(val[0])
                            } else {
                                Value::vector(val)
                            }
                        } else {
                            read_space_value(state, *space, key)
                        };
                        rec.push(ChangeEntry {
                            target: plan.program.spaces[*space as usize].name.clone(),
                            key: key.to_vec(),
                            old: old.unwrap(),
                            new,
                        });
                    }
                }
            }
            StagedWrite::Cell { cf, cell, val } => {
                let store = state.cell_at(*cf);
                let old_val = record.as_ref().map(|_| store.value(*cell as usize));
                // index/scalar values coerce to the cell's kind
                let changed = match (&store.data, val) {
                    (CellData::Index(v), StagedCell::I(x)) => v[*cell as usize] != *x,
                    (CellData::Index(v), StagedCell::S(x)) => v[*cell as usize] != *x as u64,
                    (CellData::Scalar(v), StagedCell::S(x)) => {
                        v[*cell as usize].to_bits() != x.to_bits()
                    }
                    (CellData::Scalar(v), StagedCell::I(x)) => v[*cell as usize] != *x as f64,
                    (CellData::Vector { dim, data }, StagedCell::V(x)) => {
                        data[*cell as usize * dim..(*cell as usize + 1) * dim] != x[..]
                    }
                    _ => panic!("cell kind mismatch"),
                };
                if changed {
                    changed_any = true;
                    if !ctx.dry {
                        let store = state.cell_at_mut(*cf);
                        match (&mut store.data, val) {
                            (CellData::Index(v), StagedCell::I(x)) => v[*cell as usize] = *x,
                            (CellData::Index(v), StagedCell::S(x)) => {
                                v[*cell as usize] = *x as u64
                            }
                            (CellData::Scalar(v), StagedCell::S(x)) => v[*cell as usize] = *x,
                            (CellData::Scalar(v), StagedCell::I(x)) => {
                                v[*cell as usize] = *x as f64
                            }
                            (CellData::Vector { dim, data }, StagedCell::V(x)) => {
                                data[*cell as usize * *dim..(*cell as usize + 1) * *dim]
                                    .copy_from_slice(x)
                            }
                            _ => unreachable!(),
                        }
                    }
                    if let Some(rec) = record.as_mut() {
                        let new = match val {
                            StagedCell::I(x) => Value::Index(*x),
                            StagedCell::S(x) => Value::Scalar(*x),
                            StagedCell::V(x) => Value::vector(x),
                        };
                        rec.push(ChangeEntry {
                            target: format!(".{}", state.cell_at(*cf).name),
                            key: vec![state.cell_at(*cf).keys[*cell as usize]],
                            old: old_val.unwrap(),
                            new,
                        });
                    }
                }
            }
        }
    }
    Ok(changed_any)
}

/// Reused per-sweep scratch space, so firing guards allocate nothing in
/// steady state.
#[derive(Default)]
struct Scratch {
    staged: Vec<StagedWrite>,
    expansions: Vec<(u64, u64)>,
}

/// Executes every block for one row. Returns whether any block changed state.
fn execute_row(
    plan: &LinkedPlan,
    state: &mut ExecutionState,
    row: usize,
    binders: &mut SmallVec<[u64; 4]>,
    stats: &mut SweepStats,
    ctx: &mut SweepCtx,
    scratch: &mut Scratch,
) -> Result<bool, ExecError> {
    stats.tuples_visited += 1;
    if let Some(obs) = ctx.observer.as_mut() {
        let tuple = plan_row_tuple(plan, row);
        obs.on_visit(&tuple);
    }
    let mut fired_any = false;
    let mut changed_any = false;
    for block in &plan.blocks {
        let fired = {
            let rctx = RowCtx {
                state,
                store: &plan.store,
                cell_maps: &plan.cell_maps,
                row,
                binders,
                epsilon: plan.epsilon,
            };
            matches!(rctx.eval(&block.guard).map_err(|e| e.with_tuple(plan, row))?, Val::B(true))
        };
        if !fired {
            continue;
        }
        fired_any = true;
        scratch.staged.clear();
        scratch.expansions.clear();
        stage_stmts(
            plan,
            state,
            row,
            binders,
            &block.body,
            &mut scratch.staged,
            &mut scratch.expansions,
        )
        .map_err(|e| e.with_tuple(plan, row))?;
        let mut rec = ctx.observer.is_some().then(ChangeRecord::new);
        let changed = apply_staged(plan, state, &scratch.staged, ctx, rec.as_mut())?;
        if changed {
            changed_any = true;
        }
        if let Some(obs) = ctx.observer.as_mut() {
            for &(u, w) in &scratch.expansions {
                obs.on_expand(u, w);
            }
            obs.on_applied(state, rec.as_ref().unwrap());
        }
    }
    if fired_any {
        stats.guards_fired += 1;
    }
    if changed_any {
        stats.state_changes += 1;
    }
    Ok(changed_any)
}

pub(crate) fn plan_row_tuple(plan: &LinkedPlan, row: usize) -> Tuple {
    let schema = plan.program.iterated_reservoir().schema();
    let values = (0..schema.arity())
        .map(|slot| match schema.kind_at(slot) {
            crate::ir::FieldKind::Index => Value::Index(plan.store.index_at(slot, row)),
            crate::ir::FieldKind::Scalar => Value::Scalar(plan.store.scalar_at(slot, row)),
            crate::ir::FieldKind::Vector(_) => Value::Vector(plan.store.vector_at(slot, row)),
        })
        .collect();
    Tuple::new(values)
}

/// One pass over the given top-level order (a full sweep or a random batch).
pub(crate) fn run_pass(
    plan: &LinkedPlan,
    state: &mut ExecutionState,
    order: &[u32],
    ctx: &mut SweepCtx,
) -> Result<SweepStats, ExecError> {
    let start = Instant::now();
    let mut stats = SweepStats::default();
    let mut binders: SmallVec<[u64; 4]> = SmallVec::new();
    let mut scratch = Scratch::default();
    match &plan.shape {
        NestShape::Flat => {
            for &t in order {
                execute_row(plan, state, t as usize, &mut binders, &mut stats, ctx, &mut scratch)?;
            }
        }
        NestShape::Grouped { .. } => {
            let g1 = plan.group1.as_ref().unwrap();
            for &g in order {
                binders.push(g1.values[g as usize]);
                for &row in g1.group_rows(g as usize) {
                    execute_row(plan, state, row as usize, &mut binders, &mut stats, ctx, &mut scratch)?;
                }
                binders.pop();
            }
        }
        NestShape::Grouped2 { .. } => {
            let g2 = plan.group2.as_ref().unwrap();
            for &g in order {
                binders.push(g2.outer_values[g as usize]);
                for s in g2.subgroups(g as usize) {
                    binders.push(g2.sub_values[s]);
                    for &row in g2.sub_rows(s) {
                        execute_row(plan, state, row as usize, &mut binders, &mut stats, ctx, &mut scratch)?;
                    }
                    binders.pop();
                }
                binders.pop();
            }
        }
        NestShape::Grouped2Jagged { .. } => {
            let g2 = plan.group2.as_ref().unwrap();
            for &g in order {
                binders.push(g2.outer_values[g as usize]);
                for kk in 0..g2.max_sub_len[g as usize] as usize {
                    binders.push(kk as u64);
                    for s in g2.subgroups(g as usize) {
                        let rows = g2.sub_rows(s);
                        if kk < rows.len() {
                            execute_row(
                                plan,
                                state,
                                rows[kk] as usize,
                                &mut binders,
                                &mut stats,
                                ctx,
                                &mut scratch,
                            )?;
                        }
                    }
                    binders.pop();
                }
                binders.pop();
            }
        }
    }
    stats.wall = start.elapsed();
    Ok(stats)
}

impl LinkedPlan {
    /// Executes the forelem body exactly once per tuple, in scheduler order.
    pub fn run_forelem(
        &self,
        state: &mut ExecutionState,
        sched: &Scheduler,
    ) -> Result<SweepStats, ExecError> {
        if self.kind != crate::ir::LoopKind::Forelem {
            return Err(ExecError::WrongLoopKind("forelem"));
        }
        let order = sched
            .full_order(0, self.top_len())
            .ok_or(ExecError::SchedulerUnsupported("forelem requires a sweep policy"))?;
        run_pass(self, state, &order, &mut SweepCtx::plain())
    }

    /// Repeats sweeps until one full sweep changes nothing, or the budget
    /// runs out. Under a random-with-replacement policy a zero-change batch
    /// triggers a full verification sweep before termination is declared.
    pub fn run_whilelem(
        &self,
        state: &mut ExecutionState,
        sched: &Scheduler,
        max_sweeps: u64,
    ) -> Result<(Vec<SweepStats>, Termination), ExecError> {
        self.run_whilelem_observed(state, sched, max_sweeps, None)
    }

    pub fn run_whilelem_observed(
        &self,
        state: &mut ExecutionState,
        sched: &Scheduler,
        max_sweeps: u64,
        mut observer: Option<&mut dyn SweepObserver>,
    ) -> Result<(Vec<SweepStats>, Termination), ExecError> {
        if self.kind != crate::ir::LoopKind::Whilelem {
            return Err(ExecError::WrongLoopKind("whilelem"));
        }
        let n = self.top_len();
        let mut all = Vec::new();
        let mut force_full = false;
        for sweep_no in 0..max_sweeps {
            let (order, full) = match (force_full, sched.pass_order(sweep_no, n)) {
                (true, _) | (false, (_, true)) => {
                    (sched.in_order_buf(n), true)
                }
                (false, (order, false)) => (order, false),
            };
            let mut ctx = SweepCtx {
                sink: None,
                observer: observer.as_mut().map(|o| &mut **o as &mut dyn SweepObserver),
                dry: false,
            };
            let stats = run_pass(self, state, &order, &mut ctx)?;
            let changes = stats.state_changes;
            all.push(stats);
            if changes == 0 {
                if full {
                    return Ok((all, Termination::Terminated));
                }
                // random batch made no progress; verify with a full sweep
                force_full = true;
            } else {
                force_full = false;
            }
        }
        Ok((all, Termination::SweepBudgetExhausted))
    }

    /// True when re-executing every tuple would change nothing (dry run).
    pub fn is_quiescent(&self, state: &mut ExecutionState) -> Result<bool, ExecError> {
        let order = Scheduler::SweepInOrder.in_order_buf(self.top_len());
        let mut ctx = SweepCtx { sink: None, observer: None, dry: true };
        let stats = run_pass(self, state, &order, &mut ctx)?;
        Ok(stats.state_changes == 0)
    }
}

/// Links and runs a forelem program (convenience wrapper).
pub fn run_forelem(
    program: &Program,
    state: &mut ExecutionState,
    sched: &Scheduler,
) -> Result<SweepStats, ExecError> {
    LinkedPlan::new(program.clone())?.run_forelem(state, sched)
}

/// Links and runs a whilelem program (convenience wrapper).
pub fn run_whilelem(
    program: &Program,
    state: &mut ExecutionState,
    sched: &Scheduler,
    max_sweeps: u64,
) -> Result<(Vec<SweepStats>, Termination), ExecError> {
    LinkedPlan::new(program.clone())?.run_whilelem(state, sched, max_sweeps)
}

/// Executes the program's blocks once for an explicit tuple value, returning
/// the change record. Fields are taken from the tuple itself, so this works
/// for any tuple conforming to the schema, present in the reservoir or not.
/// Localized programs are not supported through this entry point.
pub fn execute_tuple(
    program: &Program,
    state: &mut ExecutionState,
    tuple: &Tuple,
) -> Result<ChangeRecord, ExecError> {
    execute_tuple_inner(program, state, tuple, false)
}

/// Like [`execute_tuple`] but stages without applying.
pub fn execute_tuple_dry(
    program: &Program,
    state: &mut ExecutionState,
    tuple: &Tuple,
) -> Result<ChangeRecord, ExecError> {
    execute_tuple_inner(program, state, tuple, true)
}

fn execute_tuple_inner(
    program: &Program,
    state: &mut ExecutionState,
    tuple: &Tuple,
    dry: bool,
) -> Result<ChangeRecord, ExecError> {
    if !program.localized.is_empty() {
        return Err(ExecError::UnsupportedNest(
            "execute_tuple does not support localized programs; drive the plan instead".into(),
        ));
    }
    let schema = program.iterated_reservoir().schema().clone();
    // Rebuild the program with a single-tuple reservoir and run one flat pass.
    let mut single = program.clone();
    let name = single.root.reservoir.clone();
    *single.reservoir_mut(&name).unwrap() =
        crate::ir::TupleReservoir::from_tuples(&name, schema, std::slice::from_ref(tuple))
            .map_err(|e| ExecError::UnknownName(e.to_string()))?;
    single.root =
        crate::ir::LoopNest::flat(program.root.kind, name, program.root.blocks().to_vec());
    let plan = LinkedPlan::new(single)?;
    struct Recorder(ChangeRecord);
    impl SweepObserver for Recorder {
        fn on_applied(&mut self, _state: &ExecutionState, record: &ChangeRecord) {
            self.0.extend(record.iter().cloned());
        }
    }
    let mut recorder = Recorder(Vec::new());
    let mut ctx = SweepCtx { sink: None, observer: Some(&mut recorder), dry };
    run_pass(&plan, state, &[0], &mut ctx)?;
    Ok(recorder.0)
}

impl ExecError {
    fn with_tuple(self, plan: &LinkedPlan, row: usize) -> ExecError {
        match self {
            ExecError::DivByZero => {
                let t = plan_row_tuple(plan, row);
                ExecError::DivByZeroAt(format!("{:?}", t.values))
            }
            other => other,
        }
    }
}

/// Duration-free default for accumulating stats.
impl Default for SweepStats {
    fn default() -> Self {
        SweepStats { tuples_visited: 0, guards_fired: 0, state_changes: 0, wall: Duration::ZERO }
    }
}

/// Bare expression evaluation against an explicit tuple (reference API; the
/// sweep path uses linked rows directly).
pub fn eval_expr(
    program: &Program,
    state: &ExecutionState,
    expr: &Expr,
    tuple: &Tuple,
) -> Result<Value, ExecError> {
    let schema = program.iterated_reservoir().schema();
    let lexpr = LinkedPlan::link_expr_for_tuple(program, schema, expr, tuple)?;
    let empty = crate::ir::TupleReservoir::empty("@", crate::ir::TupleSchema::indices(&[]));
    let store = super::store::TupleStore::build(&empty, super::store::Layout::Soa, None);
    let cell_maps = super::link::CellMaps::default();
    let ctx = RowCtx { state, store: &store, cell_maps: &cell_maps, row: 0, binders: &[], epsilon: program.epsilon };
    Ok(ctx.eval(&lexpr)?.to_value())
}

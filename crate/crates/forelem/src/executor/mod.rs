//! Execution of forelem/whilelem programs: single-stream sweeps, termination
//! detection, and the partitioned parallel runtime.

mod eval;
mod exec;
mod link;
mod partition;
mod scheduler;
mod state;
mod store;

pub use exec::{
    eval_expr, execute_tuple, execute_tuple_dry, run_forelem, run_whilelem, ChangeEntry,
    ChangeRecord, DeltaSink, SweepObserver,
};
pub use link::{LinkedPlan, NestShape};
pub use partition::{
    merge_partition_states, run_partitioned, ExchangeObserver, PartitionSpec, PartitionedOutcome,
    RunStats,
};
pub use scheduler::Scheduler;
pub use state::{CellData, CellStore, ExecutionState};
pub use store::{GroupIndex, GroupIndex2, Layout, TupleStore};

use std::time::Duration;

use thiserror::Error;

use crate::ir::Diagnostic;

/// Counters for one sweep (or one random batch / verification pass).
///
/// `guards_fired` counts tuple executions where at least one guard fired;
/// `state_changes` counts those that changed state, so
/// `state_changes <= guards_fired <= tuples_visited` holds per pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepStats {
    pub tuples_visited: u64,
    pub guards_fired: u64,
    pub state_changes: u64,
    pub wall: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Terminated,
    SweepBudgetExhausted,
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("program failed validation: {0:?}")]
    Invalid(Vec<Diagnostic>),
    #[error("root loop is not a {0}")]
    WrongLoopKind(&'static str),
    #[error("division by zero")]
    DivByZero,
    #[error("division by zero while executing tuple {0}")]
    DivByZeroAt(String),
    #[error("key expression evaluated to non-index value {0}")]
    BadKey(f64),
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("unsupported nest: {0}")]
    UnsupportedNest(String),
    #[error("layout unsupported: {0}")]
    LayoutUnsupported(String),
    #[error("scheduler unsupported: {0}")]
    SchedulerUnsupported(&'static str),
    #[error(transparent)]
    Exchange(#[from] crate::exchange::ExchangeError),
}

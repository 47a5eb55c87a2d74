//! Tuple-reservoir loop programs and the machinery to transform and run them.
//!
//! Programs are written as `forelem`/`whilelem` loops over unordered multisets
//! of tuples (reservoirs). Data lives in keyed shared spaces behind an affine
//! address function; no physical layout or iteration order is part of the
//! program itself. Transformations rewrite loop structure (orthogonalization,
//! reservoir splitting, localization, materialization, tuple-reservoir
//! reduction, interchange) and a concretization step picks layouts. The
//! executor runs single-stream or partitioned with pluggable tuple schedulers
//! and three replica-exchange schemes.
//!
//! The `apps` module builds the four reference programs (k-means, pagerank,
//! sparse matmul, sort) plus independent oracles for verification; `datagen`
//! produces clustered point sets and scale-free graphs; `cli` backs the
//! `forelem` binary.

pub mod apps;
pub mod cli;
pub mod datagen;
pub mod exchange;
pub mod executor;
pub mod ir;
pub mod transforms;

pub use executor::{ExecutionState, RunStats, Scheduler, SweepStats, Termination};
pub use ir::{Expr, FieldKind, Program, Tuple, TupleReservoir, TupleSchema, Value};

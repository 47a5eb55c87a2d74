//! The tuple-based loop intermediate representation.
//!
//! A [`Program`] couples named [`TupleReservoir`]s (unordered tuple multisets),
//! named shared-space declarations, and a loop tree of guarded atomic update
//! blocks. Everything here is immutable after construction; execution state is
//! owned by the executor.

mod expr;
mod program;
mod reservoir;
mod schema;
mod space;
mod validate;

pub use expr::{ArithOp, CmpOp, Expr};
pub use program::{
    Binder, DomainKind, GuardedBlock, LocalizedFieldDecl, LoopBody, LoopKind, LoopNest, Program,
    Stmt, WriteOp, SENTINEL_STUB,
};
pub use reservoir::{build_reservoir, ColumnData, TupleReservoir};
pub use schema::{FieldKind, Tuple, TupleSchema, Value, VecStorage};
pub use space::{Key, SpaceDecl, SpaceError, SpaceStore};
pub use validate::{validate_program, Diagnostic, DiagnosticKind};

use thiserror::Error;

/// Construction-time errors for reservoirs and schemas.
#[derive(Debug, Error, PartialEq)]
pub enum IrError {
    #[error("tuple {index} does not conform to schema: {reason}")]
    SchemaMismatch { index: usize, reason: String },
    #[error("duplicate field name `{0}` in schema")]
    DuplicateField(String),
    #[error("vector field `{0}` must have dim >= 1")]
    ZeroDimVector(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{0}` is not an index field")]
    NotIndexField(String),
}

//! Sorting as a whilelem program: any out-of-order pair swaps, until no pair
//! is out of order. The adjacent-pair reservoir gives bubble-sort-like
//! behavior; the full i < j reservoir admits many more schedules.

use crate::executor::ExecutionState;
use crate::ir::{
    CmpOp, Expr, GuardedBlock, LoopKind, LoopNest, Program, SpaceDecl, Stmt, TupleReservoir,
    TupleSchema, WriteOp,
};

use super::AppError;

pub fn build_sort_spec(n: usize, adjacent_only: bool) -> Result<Program, AppError> {
    if n == 0 {
        return Err(AppError::InvalidProblem("cannot sort an empty array".into()));
    }
    let mut i_col = Vec::new();
    let mut j_col = Vec::new();
    if adjacent_only {
        for i in 0..n.saturating_sub(1) as u64 {
            i_col.push(i);
            j_col.push(i + 1);
        }
    } else {
        for i in 0..n as u64 {
            for j in i + 1..n as u64 {
                i_col.push(i);
                j_col.push(j);
            }
        }
    }
    let reservoir = TupleReservoir::from_index_columns(
        "T",
        TupleSchema::indices(&["i", "j"]),
        vec![i_col, j_col],
    );
    let guard = Expr::cmp(
        CmpOp::Gt,
        Expr::read("A", vec![Expr::field("i")]),
        Expr::read("A", vec![Expr::field("j")]),
    );
    // both right-hand sides evaluate against the block-entry state, so the
    // swap needs no temporary
    let body = vec![
        Stmt::Write {
            space: "A".into(),
            keys: vec![Expr::field("i")],
            op: WriteOp::Set,
            value: Expr::read("A", vec![Expr::field("j")]),
        },
        Stmt::Write {
            space: "A".into(),
            keys: vec![Expr::field("j")],
            op: WriteOp::Set,
            value: Expr::read("A", vec![Expr::field("i")]),
        },
    ];
    let root = LoopNest::flat(LoopKind::Whilelem, "T", vec![GuardedBlock::new(guard, body)]);
    Ok(Program::new(
        "sort",
        vec![reservoir],
        vec![SpaceDecl::scalar("A", 1, 0.0).bounded(&[n as u64])],
        root,
    ))
}

pub fn init_sort(values: &[f64], state: &mut ExecutionState) {
    let a = state.space_mut("A");
    for (i, &v) in values.iter().enumerate() {
        a.write(&[i as u64], &[v]);
    }
}

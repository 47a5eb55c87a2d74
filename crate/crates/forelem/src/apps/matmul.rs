//! Sparse matrix multiplication as a forelem program: one tuple per
//! contributing (i, j, k) triple, accumulating C[i,j] += A[i,k] * B[k,j].

use crate::executor::ExecutionState;
use crate::ir::{
    Expr, GuardedBlock, LoopKind, LoopNest, Program, SpaceDecl, Stmt, TupleReservoir, TupleSchema,
    WriteOp,
};

use super::AppError;

/// Triplet-form sparse matrix.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(u32, u32, f64)>,
}

impl SparseMatrix {
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> SparseMatrix {
        let entries = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let v = data[i * cols + j];
                (v != 0.0).then_some((i as u32, j as u32, v))
            })
            .collect();
        SparseMatrix { rows, cols, entries }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for &(i, j, v) in &self.entries {
            out[i as usize * self.cols + j as usize] += v;
        }
        out
    }
}

/// Builds the triple-reservoir program. The reservoir holds every (i, j, k)
/// with A[i,k] and B[k,j] both nonzero.
pub fn build_matmul_spec(a: &SparseMatrix, b: &SparseMatrix) -> Result<Program, AppError> {
    if a.cols != b.rows {
        return Err(AppError::DimMismatch {
            left: (a.rows, a.cols),
            right: (b.rows, b.cols),
        });
    }
    let mut b_by_row: Vec<Vec<u32>> = vec![Vec::new(); b.rows];
    for &(k, j, _) in &b.entries {
        b_by_row[k as usize].push(j);
    }
    let mut i_col = Vec::new();
    let mut j_col = Vec::new();
    let mut k_col = Vec::new();
    for &(i, k, _) in &a.entries {
        for &j in &b_by_row[k as usize] {
            i_col.push(i as u64);
            j_col.push(j as u64);
            k_col.push(k as u64);
        }
    }
    let reservoir = TupleReservoir::from_index_columns(
        "X",
        TupleSchema::indices(&["i", "j", "k"]),
        vec![i_col, j_col, k_col],
    );
    let spaces = vec![
        SpaceDecl::scalar("A", 2, 0.0).bounded(&[a.rows as u64, a.cols as u64]).read_only(),
        SpaceDecl::scalar("B", 2, 0.0).bounded(&[b.rows as u64, b.cols as u64]).read_only(),
        SpaceDecl::scalar("C", 2, 0.0).bounded(&[a.rows as u64, b.cols as u64]),
    ];
    let body = vec![Stmt::Write {
        space: "C".into(),
        keys: vec![Expr::field("i"), Expr::field("j")],
        op: WriteOp::Add,
        value: Expr::mul(
            Expr::read("A", vec![Expr::field("i"), Expr::field("k")]),
            Expr::read("B", vec![Expr::field("k"), Expr::field("j")]),
        ),
    }];
    let root = LoopNest::flat(LoopKind::Forelem, "X", vec![GuardedBlock::always(body)]);
    Ok(Program::new("matmul", vec![reservoir], spaces, root))
}

pub fn init_matmul(a: &SparseMatrix, b: &SparseMatrix, state: &mut ExecutionState) {
    {
        let sa = state.space_mut("A");
        for &(i, k, v) in &a.entries {
            sa.write(&[i as u64, k as u64], &[v]);
        }
    }
    let sb = state.space_mut("B");
    for &(k, j, v) in &b.entries {
        sb.write(&[k as u64, j as u64], &[v]);
    }
}

/// Reads the product out of the state as a dense row-major matrix.
pub fn read_result(state: &ExecutionState, rows: usize, cols: usize) -> Vec<f64> {
    let c = state.space("C");
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[i * cols + j] = c.read(&[i as u64, j as u64])[0];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::{run_forelem, Scheduler};

    #[test]
    fn identity_times_matrix() {
        let a = SparseMatrix::from_dense(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let id = SparseMatrix::from_dense(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let program = build_matmul_spec(&a, &id).unwrap();
        let mut state = ExecutionState::new(&program);
        init_matmul(&a, &id, &mut state);
        run_forelem(&program, &mut state, &Scheduler::SweepInOrder).unwrap();
        assert_eq!(read_result(&state, 2, 2), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn dims_must_conform() {
        let a = SparseMatrix::from_dense(2, 3, &[1.0; 6]);
        let b = SparseMatrix::from_dense(2, 2, &[1.0; 4]);
        assert!(matches!(build_matmul_spec(&a, &b), Err(AppError::DimMismatch { .. })));
    }

    #[test]
    fn empty_reservoir_runs_as_noop() {
        let a = SparseMatrix { rows: 2, cols: 2, entries: vec![] };
        let b = SparseMatrix::from_dense(2, 2, &[1.0; 4]);
        let program = build_matmul_spec(&a, &b).unwrap();
        let mut state = ExecutionState::new(&program);
        init_matmul(&a, &b, &mut state);
        let stats = run_forelem(&program, &mut state, &Scheduler::SweepInOrder).unwrap();
        assert_eq!(stats.tuples_visited, 0);
        assert_eq!(read_result(&state, 2, 2), vec![0.0; 4]);
    }
}

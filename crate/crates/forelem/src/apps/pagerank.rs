//! PageRank as a whilelem program over edges, in the push-delta form: each
//! edge pushes the change of its source's rank since the last time it fired,
//! so no global iteration structure or reinitialization is needed.
//!
//! Vertices without out-edges are expanded into a fan-out to every other
//! vertex before the program is built; the reduced form compacts each such
//! fan-out family into one stub tuple expanded at execution time.

use crate::executor::ExecutionState;
use crate::ir::{
    CmpOp, Expr, GuardedBlock, LoopKind, LoopNest, Program, SpaceDecl, Stmt, TupleReservoir,
    TupleSchema, WriteOp, SENTINEL_STUB,
};

use super::AppError;

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PageRankProblem {
    pub vertices: usize,
    /// Directed edges; self-loops are dropped at ingestion, parallel edges
    /// kept (they count in both the out-degree and the pushed rank).
    pub edges: Vec<(u32, u32)>,
    pub damping: f64,
    pub epsilon: f64,
}

impl PageRankProblem {
    pub fn new(vertices: usize, edges: Vec<(u32, u32)>) -> Result<PageRankProblem, AppError> {
        if vertices == 0 {
            return Err(AppError::EmptyGraph);
        }
        if let Some(&(u, v)) = edges.iter().find(|(u, v)| {
            *u as usize >= vertices || *v as usize >= vertices
        }) {
            return Err(AppError::InvalidProblem(format!(
                "edge ({u},{v}) references a vertex >= {vertices}"
            )));
        }
        let edges = edges.into_iter().filter(|(u, v)| u != v).collect();
        Ok(PageRankProblem {
            vertices,
            edges,
            damping: DEFAULT_DAMPING,
            epsilon: DEFAULT_EPSILON,
        })
    }

    pub fn with_damping(mut self, d: f64) -> Self {
        self.damping = d;
        self
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = eps;
        self
    }
}

/// Out-degrees (with multiplicity) after dangling expansion, plus the list
/// of dangling vertices. A dangling vertex links to every other vertex, so
/// its degree becomes |V| - 1 (no expansion is possible for |V| = 1).
pub fn expanded_degrees(prob: &PageRankProblem) -> (Vec<u64>, Vec<u32>) {
    let mut dout = vec![0u64; prob.vertices];
    for &(u, _) in &prob.edges {
        dout[u as usize] += 1;
    }
    let mut dangling = Vec::new();
    if prob.vertices > 1 {
        for (u, d) in dout.iter_mut().enumerate() {
            if *d == 0 {
                *d = prob.vertices as u64 - 1;
                dangling.push(u as u32);
            }
        }
    }
    (dout, dangling)
}

/// The fully expanded edge multiset (real edges first, then each dangling
/// vertex's fan-out in ascending target order).
pub fn expanded_edges(prob: &PageRankProblem) -> Vec<(u32, u32)> {
    let (_, dangling) = expanded_degrees(prob);
    let mut out = prob.edges.clone();
    for &u in &dangling {
        for v in 0..prob.vertices as u32 {
            if v != u {
                out.push((u, v));
            }
        }
    }
    out
}

fn spaces(prob: &PageRankProblem, n_edges: u64) -> Vec<SpaceDecl> {
    vec![
        SpaceDecl::scalar("PR", 1, 0.0).bounded(&[prob.vertices as u64]),
        SpaceDecl::scalar("OLD", 1, 0.0).bounded(&[n_edges.max(1)]),
        SpaceDecl::scalar("Dout", 1, 0.0).bounded(&[prob.vertices as u64]).read_only(),
    ]
}

fn push_blocks(prob: &PageRankProblem) -> Vec<GuardedBlock> {
    let pr_u = || Expr::read("PR", vec![Expr::field("u")]);
    let old = || Expr::read("OLD", vec![Expr::field("e")]);
    let guard = Expr::cmp(CmpOp::DeltaExceeds, pr_u(), old());
    let delta = Expr::div(
        Expr::mul(Expr::scalar(prob.damping), Expr::sub(pr_u(), old())),
        Expr::read("Dout", vec![Expr::field("u")]),
    );
    let body = vec![
        Stmt::Write {
            space: "PR".into(),
            keys: vec![Expr::field("v")],
            op: WriteOp::Add,
            value: delta,
        },
        Stmt::Write {
            space: "OLD".into(),
            keys: vec![Expr::field("e")],
            op: WriteOp::Set,
            value: pr_u(),
        },
    ];
    vec![GuardedBlock::new(guard, body)]
}

/// Builds the edge-reservoir whilelem program, with dangling vertices fully
/// expanded. Tuples carry a unique edge id `e` that keys the per-edge `OLD`
/// value, so parallel edges each track their own pushed rank.
pub fn build_pagerank_spec(prob: &PageRankProblem) -> Program {
    let edges = expanded_edges(prob);
    let n_edges = edges.len() as u64;
    let mut u_col = Vec::with_capacity(edges.len());
    let mut v_col = Vec::with_capacity(edges.len());
    let e_col: Vec<u64> = (0..n_edges).collect();
    for &(u, v) in &edges {
        u_col.push(u as u64);
        v_col.push(v as u64);
    }
    let reservoir = TupleReservoir::from_index_columns(
        "E",
        TupleSchema::indices(&["u", "v", "e"]),
        vec![u_col, v_col, e_col],
    );
    let root = LoopNest::flat(LoopKind::Whilelem, "E", push_blocks(prob));
    Program::new("pagerank", vec![reservoir], spaces(prob, n_edges), root)
        .with_epsilon(prob.epsilon)
}

/// Builds the reduced form directly: each dangling fan-out family is one
/// stub tuple with a sentinel target, and the body expands stubs through a
/// bounded index loop. Equivalent to applying tuple-reservoir reduction to
/// the expanded program, but never materializes the expansion.
pub fn build_pagerank_spec_reduced(prob: &PageRankProblem) -> Program {
    let (_, dangling) = expanded_degrees(prob);
    let n = prob.vertices as u64;
    let mut u_col: Vec<u64> = Vec::with_capacity(prob.edges.len() + dangling.len());
    let mut v_col = Vec::with_capacity(u_col.capacity());
    for &(u, v) in &prob.edges {
        u_col.push(u as u64);
        v_col.push(v as u64);
    }
    for &u in &dangling {
        u_col.push(u as u64);
        v_col.push(SENTINEL_STUB);
    }
    let n_rows = u_col.len() as u64;
    let e_col: Vec<u64> = (0..n_rows).collect();
    let reservoir = TupleReservoir::from_index_columns(
        "E",
        TupleSchema::indices(&["u", "v", "e"]),
        vec![u_col, v_col, e_col],
    );

    // stub block enumerates every target but the family vertex
    let base = push_blocks(prob).remove(0);
    let is_stub = Expr::cmp(CmpOp::Eq, Expr::field("v"), Expr::index(SENTINEL_STUB));
    let not_stub = Expr::cmp(CmpOp::Ne, Expr::field("v"), Expr::index(SENTINEL_STUB));
    let (push, rest) = (base.body[0].clone(), base.body[1].clone());
    let push_w = match push {
        Stmt::Write { space, op, value, .. } => Stmt::Write {
            space,
            keys: vec![Expr::field("@v")],
            op,
            value,
        },
        _ => unreachable!(),
    };
    let stub_block = GuardedBlock::new(
        Expr::And(vec![base.guard.clone(), is_stub]),
        vec![
            Stmt::ForelemRange {
                binder: "@v".into(),
                len: n,
                except: Some(Expr::field("u")),
                body: vec![push_w],
            },
            rest,
        ],
    );
    let plain_block = GuardedBlock::new(Expr::And(vec![base.guard, not_stub]), base.body);

    let root = LoopNest::flat(LoopKind::Whilelem, "E", vec![stub_block, plain_block]);
    Program::new("pagerank_reduced", vec![reservoir], spaces(prob, n_rows), root)
        .with_epsilon(prob.epsilon)
}

/// Rank vector initialized at `(1-d)/|V|`, per-edge memory at zero, and the
/// expanded out-degrees.
pub fn init_pagerank(prob: &PageRankProblem, state: &mut ExecutionState) {
    let init = (1.0 - prob.damping) / prob.vertices as f64;
    {
        let pr = state.space_mut("PR");
        for v in 0..prob.vertices {
            pr.write(&[v as u64], &[init]);
        }
    }
    let (dout, _) = expanded_degrees(prob);
    let space = state.space_mut("Dout");
    for (u, &d) in dout.iter().enumerate() {
        space.write(&[u as u64], &[d as f64]);
    }
}

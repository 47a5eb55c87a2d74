//! k-means clustering as a whilelem program.
//!
//! The reservoir holds every (cluster, point) pair; a tuple fires when its
//! point is strictly closer to the candidate cluster's center than to its
//! current one, reassigning the point and incrementally updating the cluster
//! statistics. Cluster statistics are kept as a coordinate-sum vector plus a
//! size count, with the center computed as sum/size on read; that makes the
//! incremental mean updates exactly additive and exchange-commutative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::executor::ExecutionState;
use crate::ir::{
    CmpOp, Expr, GuardedBlock, LoopKind, LoopNest, Program, SpaceDecl, Stmt, TupleReservoir,
    TupleSchema, WriteOp,
};

use super::AppError;

#[derive(Debug, Clone)]
pub struct KMeansProblem {
    /// Row-major `n * dim` coordinates.
    pub points: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub k: usize,
    pub seed: u64,
    /// A reassignment must beat the current distance by more than this.
    pub convergence_delta: f64,
    /// Optional early stop: terminate when the fraction of points switched
    /// in a round drops below this.
    pub threshold: Option<f64>,
}

impl KMeansProblem {
    pub fn new(points: Vec<f64>, dim: usize, k: usize, seed: u64) -> Result<KMeansProblem, AppError> {
        let n = points.len() / dim.max(1);
        if dim == 0 || k == 0 || n < k || points.len() != n * dim {
            return Err(AppError::InvalidProblem(format!(
                "need n >= k >= 1 and dim >= 1 (n={n}, k={k}, dim={dim})"
            )));
        }
        Ok(KMeansProblem {
            points,
            n,
            dim,
            k,
            seed,
            convergence_delta: 0.0,
            threshold: None,
        })
    }
}

/// Builds the whilelem program over all (m, x) pairs.
pub fn build_kmeans_spec(prob: &KMeansProblem) -> Program {
    let (n, k, dim) = (prob.n as u64, prob.k as u64, prob.dim);
    let mut m_col = Vec::with_capacity((n * k) as usize);
    let mut x_col = Vec::with_capacity((n * k) as usize);
    for x in 0..n {
        for m in 0..k {
            m_col.push(m);
            x_col.push(x);
        }
    }
    let reservoir =
        TupleReservoir::from_index_columns("T", TupleSchema::indices(&["m", "x"]), vec![m_col, x_col]);

    let spaces = vec![
        SpaceDecl::vector("COORDS", 1, dim).bounded(&[n]).read_only(),
        SpaceDecl::scalar("M", 1, 0.0).bounded(&[n]),
        SpaceDecl::vector("M_SUM", 1, dim).bounded(&[k]).compensated(),
        SpaceDecl::scalar("M_SIZE", 1, 0.0).bounded(&[k]),
    ];

    let cur = || Expr::read("M", vec![Expr::field("x")]);
    let center = |key: Expr| {
        Expr::div(
            Expr::read("M_SUM", vec![key.clone()]),
            Expr::read("M_SIZE", vec![key]),
        )
    };
    let point = || Expr::read("COORDS", vec![Expr::field("x")]);
    let dist_to_candidate = Expr::dist(point(), center(Expr::field("m")));
    let dist_to_current = Expr::dist(point(), center(cur()));
    let bar = if prob.convergence_delta > 0.0 {
        Expr::sub(dist_to_current, Expr::scalar(prob.convergence_delta))
    } else {
        dist_to_current
    };
    let guard = Expr::And(vec![
        Expr::cmp(CmpOp::Ne, cur(), Expr::field("m")),
        // never empty the source cluster, and never read the center of an
        // emptied one: concurrent partitions can drain a cluster to zero
        // between exchanges, and both center reads divide by the size
        Expr::cmp(CmpOp::Gt, Expr::read("M_SIZE", vec![cur()]), Expr::scalar(1.0)),
        Expr::cmp(
            CmpOp::Ge,
            Expr::read("M_SIZE", vec![Expr::field("m")]),
            Expr::scalar(1.0),
        ),
        Expr::cmp(CmpOp::Lt, dist_to_candidate, bar),
    ]);
    let body = vec![
        Stmt::Write { space: "M_SUM".into(), keys: vec![cur()], op: WriteOp::Sub, value: point() },
        Stmt::Write {
            space: "M_SIZE".into(),
            keys: vec![cur()],
            op: WriteOp::Sub,
            value: Expr::scalar(1.0),
        },
        Stmt::Write {
            space: "M_SUM".into(),
            keys: vec![Expr::field("m")],
            op: WriteOp::Add,
            value: point(),
        },
        Stmt::Write {
            space: "M_SIZE".into(),
            keys: vec![Expr::field("m")],
            op: WriteOp::Add,
            value: Expr::scalar(1.0),
        },
        Stmt::Write {
            space: "M".into(),
            keys: vec![Expr::field("x")],
            op: WriteOp::Set,
            value: Expr::field("m"),
        },
    ];
    let root = LoopNest::flat(LoopKind::Whilelem, "T", vec![GuardedBlock::new(guard, body)]);
    Program::new("kmeans", vec![reservoir], spaces, root)
}

/// Seeds the state: coordinates, a uniform random assignment, and the
/// cluster statistics computed from it. Empty clusters are re-seeded by
/// stealing one point from the largest cluster until every size is >= 1.
pub fn init_kmeans(prob: &KMeansProblem, state: &mut ExecutionState) {
    let mut rng = ChaCha8Rng::seed_from_u64(prob.seed);
    let mut assign: Vec<u64> = (0..prob.n).map(|_| rng.gen_range(0..prob.k as u64)).collect();

    let mut counts = vec![0u64; prob.k];
    for &a in &assign {
        counts[a as usize] += 1;
    }
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let largest = (0..prob.k).max_by_key(|&m| counts[m]).unwrap();
        let victim = assign.iter().position(|&a| a == largest as u64).unwrap();
        assign[victim] = empty as u64;
        counts[largest] -= 1;
        counts[empty] += 1;
    }

    {
        let coords = state.space_mut("COORDS");
        for x in 0..prob.n {
            coords.write(&[x as u64], &prob.points[x * prob.dim..(x + 1) * prob.dim]);
        }
    }
    {
        let m = state.space_mut("M");
        for (x, &a) in assign.iter().enumerate() {
            m.write(&[x as u64], &[a as f64]);
        }
    }
    {
        let sum = state.space_mut("M_SUM");
        for (x, &a) in assign.iter().enumerate() {
            sum.add(&[a], &prob.points[x * prob.dim..(x + 1) * prob.dim]);
        }
    }
    {
        let size = state.space_mut("M_SIZE");
        for (m, &c) in counts.iter().enumerate() {
            size.write(&[m as u64], &[c as f64]);
        }
    }
}

/// Distances and consistency checks used to verify terminated runs. All of
/// these work on plain arrays so they stay independent of the executor.
pub mod verify {
    /// Squared Euclidean distance.
    pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    pub fn centers_from_stats(sums: &[f64], sizes: &[f64], dim: usize) -> Vec<f64> {
        let k = sizes.len();
        let mut centers = vec![0.0; k * dim];
        for m in 0..k {
            for j in 0..dim {
                centers[m * dim + j] = sums[m * dim + j] / sizes[m];
            }
        }
        centers
    }

    /// Largest margin by which any point is closer to a foreign center than
    /// to its own (0 when the state is a proper fixed point).
    pub fn fixed_point_violation(
        points: &[f64],
        dim: usize,
        assign: &[u64],
        centers: &[f64],
    ) -> f64 {
        let k = centers.len() / dim;
        let mut worst: f64 = 0.0;
        for (x, &a) in assign.iter().enumerate() {
            let p = &points[x * dim..(x + 1) * dim];
            let own = dist2(p, &centers[a as usize * dim..(a as usize + 1) * dim]).sqrt();
            for m in 0..k {
                if m as u64 != a {
                    let d = dist2(p, &centers[m * dim..(m + 1) * dim]).sqrt();
                    worst = worst.max(own - d);
                }
            }
        }
        worst
    }

    /// Exact recount of cluster sizes plus the largest per-coordinate gap
    /// between the maintained sums and a compensated recount.
    pub fn stats_consistency(
        points: &[f64],
        dim: usize,
        assign: &[u64],
        sums: &[f64],
        sizes: &[f64],
    ) -> (bool, f64) {
        let k = sizes.len();
        let mut counts = vec![0u64; k];
        let mut resum = vec![0.0f64; k * dim];
        let mut comp = vec![0.0f64; k * dim];
        for (x, &a) in assign.iter().enumerate() {
            counts[a as usize] += 1;
            for j in 0..dim {
                let (s, c) =
                    (&mut resum[a as usize * dim + j], &mut comp[a as usize * dim + j]);
                let v = points[x * dim + j];
                let t = *s + v;
                let e = if s.abs() >= v.abs() { (*s - t) + v } else { (v - t) + *s };
                *c += e;
                *s = t;
            }
        }
        let counts_exact = (0..k).all(|m| sizes[m] == counts[m] as f64);
        let mut max_gap: f64 = 0.0;
        for i in 0..k * dim {
            max_gap = max_gap.max((sums[i] - (resum[i] + comp[i])).abs());
        }
        (counts_exact, max_gap)
    }

    /// Within-cluster sum of squared distances.
    pub fn wcss(points: &[f64], dim: usize, assign: &[u64], centers: &[f64]) -> f64 {
        assign
            .iter()
            .enumerate()
            .map(|(x, &a)| {
                dist2(&points[x * dim..(x + 1) * dim], &centers[a as usize * dim..(a as usize + 1) * dim])
            })
            .sum()
    }
}

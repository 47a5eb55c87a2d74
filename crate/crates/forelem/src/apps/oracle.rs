//! Independent oracles: straightforward reference computations on plain
//! arrays, sharing nothing with the loop executor.

use super::pagerank::{expanded_degrees, expanded_edges, PageRankProblem};
use super::AppError;

/// Pull-style power iteration over the expanded edge multiset, iterated
/// until the max-norm change drops below 1e-12.
pub fn oracle_power_iteration(prob: &PageRankProblem) -> Result<Vec<f64>, AppError> {
    let n = prob.vertices;
    let (dout, _) = expanded_degrees(prob);
    let edges = expanded_edges(prob);
    let base = (1.0 - prob.damping) / n as f64;
    let mut pr = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..100_000 {
        next.iter_mut().for_each(|v| *v = base);
        for &(u, v) in &edges {
            next[v as usize] += prob.damping * pr[u as usize] / dout[u as usize] as f64;
        }
        let linf = pr
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        std::mem::swap(&mut pr, &mut next);
        if linf < 1e-12 {
            return Ok(pr);
        }
    }
    Err(AppError::NoConvergence)
}

/// Max-norm residual of the rank equation at `pr`:
/// `pr[v] - ((1-d)/|V| + d * sum over incoming of pr[u]/dout[u])`.
pub fn rank_equation_residual(prob: &PageRankProblem, pr: &[f64]) -> f64 {
    let n = prob.vertices;
    let (dout, _) = expanded_degrees(prob);
    let edges = expanded_edges(prob);
    let base = (1.0 - prob.damping) / n as f64;
    let mut expect = vec![base; n];
    for &(u, v) in &edges {
        expect[v as usize] += prob.damping * pr[u as usize] / dout[u as usize] as f64;
    }
    pr.iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max)
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max)
}

/// Batch Lloyd iterations from a given assignment, until no point moves.
/// A cluster that empties keeps its previous center. Returns the final
/// assignment, centers, within-cluster sum of squares, and iteration count.
pub fn oracle_lloyd(
    points: &[f64],
    dim: usize,
    k: usize,
    init_assign: &[u64],
) -> (Vec<u64>, Vec<f64>, f64, usize) {
    let n = init_assign.len();
    let mut assign = init_assign.to_vec();
    let mut centers = vec![0.0; k * dim];
    let mut iters = 0;
    loop {
        iters += 1;
        // means of the assigned points
        let mut counts = vec![0u64; k];
        let mut sums = vec![0.0; k * dim];
        for (x, &a) in assign.iter().enumerate() {
            counts[a as usize] += 1;
            for j in 0..dim {
                sums[a as usize * dim + j] += points[x * dim + j];
            }
        }
        for m in 0..k {
            if counts[m] > 0 {
                for j in 0..dim {
                    centers[m * dim + j] = sums[m * dim + j] / counts[m] as f64;
                }
            }
        }
        // nearest-center reassignment, lowest index wins ties
        let mut moved = false;
        for x in 0..n {
            let p = &points[x * dim..(x + 1) * dim];
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for m in 0..k {
                let d: f64 =
                    p.iter().zip(&centers[m * dim..(m + 1) * dim]).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best_d = d;
                    best = m;
                }
            }
            if assign[x] != best as u64 {
                assign[x] = best as u64;
                moved = true;
            }
        }
        if !moved || iters > 10_000 {
            break;
        }
    }
    let wcss: f64 = assign
        .iter()
        .enumerate()
        .map(|(x, &a)| {
            points[x * dim..(x + 1) * dim]
                .iter()
                .zip(&centers[a as usize * dim..(a as usize + 1) * dim])
                .map(|(p, c)| (p - c) * (p - c))
                .sum::<f64>()
        })
        .sum();
    (assign, centers, wcss, iters)
}

/// Dense triple-loop matrix product.
pub fn dense_matmul(a: &[f64], b: &[f64], m: usize, p: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for k in 0..p {
            let aik = a[i * p + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cycle_oracle() {
        let prob = PageRankProblem::new(2, vec![(0, 1), (1, 0)]).unwrap();
        let pr = oracle_power_iteration(&prob).unwrap();
        assert!((pr[0] - 0.5).abs() < 1e-10);
        assert!((pr[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn star_center_outranks_leaves() {
        // 4 leaves all pointing at vertex 0; 0 dangles and is expanded
        let prob = PageRankProblem::new(5, vec![(1, 0), (2, 0), (3, 0), (4, 0)]).unwrap();
        let pr = oracle_power_iteration(&prob).unwrap();
        for leaf in 1..5 {
            assert!(pr[0] > pr[leaf], "center {} vs leaf {}", pr[0], pr[leaf]);
        }
    }

    #[test]
    fn oracle_satisfies_the_rank_equation() {
        let prob = PageRankProblem::new(
            6,
            vec![(0, 1), (1, 2), (2, 0), (3, 1), (4, 5), (5, 0), (2, 4)],
        )
        .unwrap();
        let pr = oracle_power_iteration(&prob).unwrap();
        assert!(rank_equation_residual(&prob, &pr) < 1e-10);
    }

    #[test]
    fn lloyd_recovers_separated_blobs() {
        // two tight blobs far apart, k = 2
        let mut points = Vec::new();
        for i in 0..10 {
            points.extend_from_slice(&[0.0 + (i as f64) * 1e-3, 0.0]);
        }
        for i in 0..10 {
            points.extend_from_slice(&[100.0 + (i as f64) * 1e-3, 100.0]);
        }
        let init: Vec<u64> = (0..20).map(|i| (i % 2) as u64).collect();
        let (assign, _, _, _) = oracle_lloyd(&points, 2, 2, &init);
        let first = assign[0];
        assert!(assign[..10].iter().all(|&a| a == first));
        assert!(assign[10..].iter().all(|&a| a != first));
    }

    #[test]
    fn k1_center_is_the_mean() {
        let points = vec![1.0, 3.0, 5.0, 7.0];
        let (_, centers, _, _) = oracle_lloyd(&points, 1, 1, &[0, 0, 0, 0]);
        assert!((centers[0] - 4.0).abs() < 1e-12);
    }
}

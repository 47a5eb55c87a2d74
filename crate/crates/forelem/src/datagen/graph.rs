//! Recursive-matrix generator for scale-free-ish directed multigraphs.
//!
//! Each edge picks a quadrant of the adjacency matrix per level with fixed
//! probabilities, biasing both endpoints toward low ids and producing a
//! heavy-tailed degree distribution. Self-loops are removed, duplicates are
//! kept. Some vertices may end up unreferenced.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GraphGenConfig {
    /// log2 of the vertex count.
    pub scale: u32,
    /// Edges per vertex before self-loop removal.
    pub edge_factor: usize,
    /// Quadrant probabilities; must sum to 1.
    pub probabilities: (f64, f64, f64, f64),
    pub seed: u64,
    /// Give every vertex at least one out-edge (a rescue edge to a random
    /// other vertex). Keeps the dangling fan-out expansion from exploding
    /// the edge count on large instances; turn off to study dangling
    /// handling itself.
    pub ensure_out_edges: bool,
}

impl GraphGenConfig {
    pub fn new(scale: u32, seed: u64) -> GraphGenConfig {
        GraphGenConfig {
            scale,
            edge_factor: 8,
            probabilities: (0.57, 0.19, 0.19, 0.05),
            seed,
            ensure_out_edges: true,
        }
    }

    pub fn with_edge_factor(mut self, f: usize) -> Self {
        self.edge_factor = f;
        self
    }

    pub fn keep_dangling(mut self) -> Self {
        self.ensure_out_edges = false;
        self
    }

    pub fn vertices(&self) -> usize {
        1usize << self.scale
    }
}

/// Generates the edge list. Deterministic per seed.
pub fn gen_graph(cfg: &GraphGenConfig) -> Vec<(u32, u32)> {
    let (a, b, c, d) = cfg.probabilities;
    assert!(
        ((a + b + c + d) - 1.0).abs() <= 1e-9,
        "quadrant probabilities must sum to 1"
    );
    let n = cfg.vertices() as u32;
    let m = cfg.vertices() * cfg.edge_factor;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let mut u = 0u32;
        let mut v = 0u32;
        for _ in 0..cfg.scale {
            u <<= 1;
            v <<= 1;
            let r: f64 = rng.gen();
            if r < a {
                // top-left
            } else if r < a + b {
                v |= 1;
            } else if r < a + b + c {
                u |= 1;
            } else {
                u |= 1;
                v |= 1;
            }
        }
        if u != v {
            edges.push((u, v));
        }
    }
    if cfg.ensure_out_edges && n > 1 {
        let mut has_out = vec![false; n as usize];
        for &(u, _) in &edges {
            has_out[u as usize] = true;
        }
        for u in 0..n {
            if !has_out[u as usize] {
                let mut v = rng.gen_range(0..n);
                if v == u {
                    v = (v + 1) % n;
                }
                edges.push((u, v));
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_count_bound_after_self_loop_removal() {
        let cfg = GraphGenConfig::new(4, 1).keep_dangling();
        let edges = gen_graph(&cfg);
        assert!(edges.len() <= 16 * 8);
        assert!(edges.iter().all(|(u, v)| u != v));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = GraphGenConfig::new(6, 42);
        assert_eq!(gen_graph(&cfg), gen_graph(&cfg));
        let other = GraphGenConfig::new(6, 43);
        assert_ne!(gen_graph(&cfg), gen_graph(&other));
    }

    #[test]
    fn rescue_edges_leave_no_dangling_vertices() {
        let cfg = GraphGenConfig::new(8, 5);
        let edges = gen_graph(&cfg);
        let mut has_out = vec![false; cfg.vertices()];
        for &(u, _) in &edges {
            has_out[u as usize] = true;
        }
        assert!(has_out.iter().all(|&b| b));
    }

    #[test]
    fn degree_distribution_is_heavy_tailed() {
        // top 1% of vertices by total degree hold well over 5% of the edges
        let cfg = GraphGenConfig::new(14, 7);
        let edges = gen_graph(&cfg);
        let mut degree = vec![0u64; cfg.vertices()];
        for &(u, v) in &edges {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        degree.sort_unstable_by(|x, y| y.cmp(x));
        let top = cfg.vertices() / 100;
        let top_degree: u64 = degree[..top].iter().sum();
        let total: u64 = degree.iter().sum();
        assert!(
            top_degree as f64 > 0.05 * total as f64,
            "top-1% hold {top_degree} of {total}"
        );
    }
}

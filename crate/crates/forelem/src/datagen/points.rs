//! Clustered point generator: cluster centers drawn uniformly from
//! [0, 10]^dim, a per-cluster standard deviation from [10/16, 10/8], then
//! each point picks a cluster uniformly and samples a normal around its
//! center. Coordinates may land outside [0, 10].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone)]
pub struct ClusterGenConfig {
    pub n: usize,
    pub dim: usize,
    pub k: usize,
    pub seed: u64,
    pub center_range: (f64, f64),
    pub sigma_range: (f64, f64),
}

impl ClusterGenConfig {
    pub fn new(n: usize, dim: usize, k: usize, seed: u64) -> ClusterGenConfig {
        assert!(n >= k && k >= 1, "need n >= k >= 1");
        assert!(dim >= 1);
        ClusterGenConfig {
            n,
            dim,
            k,
            seed,
            center_range: (0.0, 10.0),
            sigma_range: (10.0 / 16.0, 10.0 / 8.0),
        }
    }

    pub fn with_sigma_range(mut self, lo: f64, hi: f64) -> Self {
        self.sigma_range = (lo, hi);
        self
    }
}

/// Returns the flattened `n * dim` points and the cluster each was drawn
/// from. With `n == k` every cluster gets exactly one point.
pub fn gen_clustered_points(cfg: &ClusterGenConfig) -> (Vec<f64>, Vec<u64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centers: Vec<f64> = (0..cfg.k * cfg.dim)
        .map(|_| rng.gen_range(cfg.center_range.0..=cfg.center_range.1))
        .collect();
    let sigmas: Vec<f64> =
        (0..cfg.k).map(|_| rng.gen_range(cfg.sigma_range.0..=cfg.sigma_range.1)).collect();

    let mut points = Vec::with_capacity(cfg.n * cfg.dim);
    let mut labels = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let c = if cfg.n == cfg.k { i } else { rng.gen_range(0..cfg.k) };
        let normal = Normal::new(0.0, sigmas[c]).expect("positive sigma");
        for j in 0..cfg.dim {
            points.push(centers[c * cfg.dim + j] + normal.sample(&mut rng));
        }
        labels.push(c as u64);
    }
    (points, labels)
}

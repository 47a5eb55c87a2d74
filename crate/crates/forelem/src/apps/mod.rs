//! The reference applications expressed in the loop IR, their state
//! initializers, independent verification oracles, and file formats.

mod driver;
pub mod io;
pub mod kmeans;
pub mod matmul;
pub mod oracle;
pub mod pagerank;
pub mod sort;

pub use driver::{
    run_kmeans_variant, run_pagerank_variant, AppRun, KMeansRun, PageRankRun, RunOptions,
};
pub use kmeans::{build_kmeans_spec, init_kmeans, KMeansProblem};
pub use matmul::{build_matmul_spec, init_matmul, SparseMatrix};
pub use oracle::{dense_matmul, linf, oracle_lloyd, oracle_power_iteration};
pub use pagerank::{
    build_pagerank_spec, build_pagerank_spec_reduced, init_pagerank, PageRankProblem,
};
pub use sort::{build_sort_spec, init_sort};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("matrix dimensions do not conform: {left:?} * {right:?}")]
    DimMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("oracle failed to converge")]
    NoConvergence,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Transform(#[from] crate::transforms::TransformError),
    #[error(transparent)]
    Exec(#[from] crate::executor::ExecError),
}

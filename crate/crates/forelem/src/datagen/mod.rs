//! Synthetic inputs: clustered point sets and scale-free directed graphs.
//! Both are deterministic per seed.

mod graph;
mod points;

pub use graph::{gen_graph, GraphGenConfig};
pub use points::{gen_clustered_points, ClusterGenConfig};

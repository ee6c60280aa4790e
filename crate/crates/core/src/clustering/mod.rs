//! K-means over-clustering and Sinkhorn-Knopp code assignment.

mod kmeans;
mod sinkhorn;

pub use kmeans::{kmeans_assign, kmeans_fit, sq_dist, ClusterModel, KMeansConfig};
pub use sinkhorn::{sinkhorn_codes, sinkhorn_plan, SinkhornConfig};

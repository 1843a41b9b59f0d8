//! Optimal-transport distances between particle clouds.

pub mod cloud;
pub mod exact;
pub mod sinkhorn;

pub use cloud::PointCloud;
pub use exact::{exact_w2, optimal_pairing, solve_assignment, EXACT_MAX_POINTS};
pub use sinkhorn::{
    entropic_ot, sinkhorn_divergence, sinkhorn_error_trace, SinkhornConfig, SinkhornEvaluator, SinkhornResult,
};

//! Particle graphs: neighbor search, node and edge features, normalization.

pub mod features;
pub mod neighbors;
pub mod noise;
pub mod norm;

pub use features::{boundary_distances, build_graph, build_graph_frames, FeatureConfig, GraphFrames, GraphSample};
pub use neighbors::{find_neighbors, find_neighbors_brute, CellList};
pub use noise::add_training_noise;
pub use norm::{compute_norm_stats, NormStats, TrajectoryView, STD_FLOOR};

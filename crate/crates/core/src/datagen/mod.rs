//! Scripted cup trajectories, ground-truth episodes and their on-disk format.

pub mod dataset;
pub mod family;
pub mod io;

pub use dataset::{
    generate_dataset, generate_dataset_with, replay, settled_start, simulate_actions, DatagenOptions, RecordKind,
    SimulationRecord, SETTLE_KE_PER_PARTICLE,
};
pub use family::{make_trajectory, noise_trajectory, FamilyKind, FamilyRanges, TrajectoryFamily};
pub use io::{read_dataset, read_manifest, read_points, write_dataset, write_points, Manifest};

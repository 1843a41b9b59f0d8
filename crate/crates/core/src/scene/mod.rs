//! Scene description and the discrete-element ground-truth simulator.

pub mod actions;
pub mod config;
pub mod dem;
pub mod init;
pub mod rigid;
pub mod state;

pub use actions::ActionBounds;
pub use config::{DemParams, SceneConfig, Wall};
pub use dem::{advance_frame, dem_step, settle, Settled};
pub use init::{init_scene, lattice_sites};
pub use rigid::{rigid_pose_apply, CupShape, Pose, RigidBodySpec};
pub use state::{Material, ParticleState};

//! Learned particle dynamics for granular pouring: a contact-model ground
//! truth, a graph network simulator with its own autodiff, optimal-transport
//! distances and a CMA-ES trajectory planner.
//!
//! Numeric code is generic over [`Real`]; the aliases below fix the two
//! supported precisions.

pub mod datagen;
pub mod error;
pub mod eval;
pub mod gns;
pub mod graph;
pub mod nn;
pub mod ot;
pub mod planner;
pub mod scalar;
pub mod scene;

pub use error::{Error, Result};
pub use scalar::Real;

/// Model in single precision, used for training, rollout and planning.
pub type Gns32 = gns::GnsModel<f32>;
/// Model in double precision, used for gradient checks.
pub type Gns64 = gns::GnsModel<f64>;
pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Graph32 = graph::GraphSample<f32>;
pub type Graph64 = graph::GraphSample<f64>;

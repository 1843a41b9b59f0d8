//! Learned particle simulator: encoder, interaction-network processor,
//! decoder, training and autoregressive rollout.

pub mod infer;
pub mod model;
pub mod rollout;
pub mod train;

pub use infer::Workspace;
pub use model::{GnsConfig, GnsModel, Interaction, Latent, LossVariant};
pub use rollout::{integrate, place_rigid, rollout, Rollout};
pub use train::{one_step_loss, sample_graph, sample_points, train, train_model, SamplePoint, TrainOptions};

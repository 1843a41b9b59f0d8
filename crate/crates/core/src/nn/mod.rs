//! Dense tensors, reverse-mode differentiation, MLPs and Adam.

pub mod adam;
pub mod checkpoint;
pub mod mlp;
pub mod tape;
pub mod tensor;

pub use adam::{adam_step, AdamState, LrSchedule};
pub use mlp::{mlp_forward, Dense, Mlp};
pub use tape::{Gradients, ParamId, ParamSet, Tape, Var, LAYER_NORM_EPS};
pub use tensor::Tensor;

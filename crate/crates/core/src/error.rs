use thiserror::Error;

/// Errors raised by the simulation, learning and planning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid scene, model or planner configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Trajectory family parameters that cannot satisfy the action bounds.
    #[error("trajectory parameter error: {0}")]
    Parameter(String),

    /// Tensor or array shapes that do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A precondition on the call itself was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The contact simulation produced a runaway velocity.
    #[error("simulation unstable: particle {particle} reached {speed:.3e} m/s at step {step}")]
    Instability { particle: usize, speed: f64, step: usize },

    /// Training loss became NaN or infinite.
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    /// A gradient was requested for a value not recorded on the tape.
    #[error("variable is not part of this recording")]
    NotRecorded,

    #[error("dataset is empty")]
    EmptyDataset,

    /// Point clouds of different size given to an exact transport solve.
    #[error("point clouds differ in size: {0} vs {1}")]
    SizeMismatch(usize, usize),

    /// On-disk artifact that does not match its manifest.
    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

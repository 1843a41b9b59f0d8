//! Via-point trajectory planning against a learned simulator.

pub mod cmaes;
pub mod pchip;
pub mod plan;

pub use cmaes::{
    cmaes_minimize, cmaes_minimize_batch, CmaState, CmaesOptions, CmaesResult, GenerationLog, EIGEN_FLOOR,
};
pub use pchip::{pchip_interpolate, Pchip};
pub use plan::{
    cost, evaluate_trajectory, granular_points, plan_trajectory, project_constraints, smoothness, Evaluation,
    PlanProblem, PlanResult, PlannerConfig, SeedOutcome, ViaTrajectory,
};

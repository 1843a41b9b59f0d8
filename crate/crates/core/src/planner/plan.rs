use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cmaes::{cmaes_minimize_batch, CmaesOptions, GenerationLog};
use super::pchip::pchip_interpolate;
use crate::error::{Error, Result};
use crate::gns::{rollout, GnsModel};
use crate::ot::{PointCloud, SinkhornConfig, SinkhornEvaluator};
use crate::scalar::Real;
use crate::scene::{ActionBounds, Material, Pose, SceneConfig};

/// Planner settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub sigma0: f64,
    pub population: usize,
    /// CMA-ES generations per seed.
    pub iterations: usize,
    /// Weight of the Sinkhorn divergence.
    pub alpha: f64,
    /// Weight of the squared second differences of the actions.
    pub beta: f64,
    pub scale_theta: f64,
    pub scale_y: f64,
    /// Box limits on via-points and limits on consecutive via-point steps.
    pub bounds: ActionBounds,
    /// Decision via-points Q; the trajectory holds Q + 1 including the start.
    pub via_points: usize,
    pub seeds: Vec<u64>,
    /// Rollout horizon in frames.
    pub horizon: usize,
    pub sinkhorn: SinkhornConfig,
}

impl PlannerConfig {
    pub fn new(horizon: usize, sinkhorn: SinkhornConfig) -> Self {
        PlannerConfig {
            sigma0: 1.5,
            population: 20,
            iterations: 150,
            alpha: 1000.0,
            beta: 0.001,
            scale_theta: PI,
            scale_y: 0.11,
            bounds: ActionBounds::default(),
            via_points: 6,
            seeds: vec![0, 1, 2, 3, 4],
            horizon,
            sinkhorn,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::Config(format!("population {} below 4", self.population)));
        }
        if !(self.scale_theta > 0.0 && self.scale_y > 0.0 && self.sigma0 > 0.0) {
            return Err(Error::Config("scales and sigma0 must be positive".into()));
        }
        if self.via_points < 1 || self.horizon < self.via_points {
            return Err(Error::Config(format!(
                "{} via-points do not fit a horizon of {}",
                self.via_points, self.horizon
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }

    /// Maps a pose to the optimizer's scaled coordinates.
    pub fn to_scaled(&self, p: Pose) -> [f64; 2] {
        [p.theta / self.scale_theta, p.y / self.scale_y]
    }

    pub fn from_scaled(&self, u: [f64; 2]) -> Pose {
        Pose::new(u[0] * self.scale_theta, u[1] * self.scale_y)
    }
}

/// Q + 1 via-points; `via[0]` is the fixed start pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViaTrajectory {
    pub via: Vec<Pose>,
}

impl ViaTrajectory {
    /// Samples an action sequence at the knots: `via[k]` is the pose of frame
    /// `k·H/Q` (frame 0 being `start`).
    pub fn from_actions(start: Pose, actions: &[Pose], q: usize) -> Result<Self> {
        let h = actions.len();
        if q == 0 || h < q {
            return Err(Error::Contract(format!("cannot place {q} via-points on {h} actions")));
        }
        let mut via = vec![start];
        for k in 1..=q {
            let frame = (k * h) / q;
            via.push(actions[frame - 1]);
        }
        Ok(ViaTrajectory { via })
    }

    /// Decision vector of the free via-points in scaled coordinates.
    pub fn encode(&self, cfg: &PlannerConfig) -> Vec<f64> {
        self.via[1..].iter().flat_map(|&p| cfg.to_scaled(p)).collect()
    }

    pub fn decode(start: Pose, x: &[f64], cfg: &PlannerConfig) -> Self {
        let mut via = vec![start];
        via.extend(x.chunks_exact(2).map(|u| cfg.from_scaled([u[0], u[1]])));
        ViaTrajectory { via }
    }
}

/// Box-clips every free via-point, then sweeps forward clipping steps to the
/// rate limits. Returns the feasible trajectory and the squared size of the
/// total adjustment in scaled units.
pub fn project_constraints(via: &ViaTrajectory, cfg: &PlannerConfig) -> (ViaTrajectory, f64) {
    let mut out = via.clone();
    if let Some((start, rest)) = out.via.split_first_mut() {
        cfg.bounds.clip(*start, rest);
    }
    let penalty = via
        .via
        .iter()
        .zip(&out.via)
        .map(|(a, b)| {
            let da = (a.theta - b.theta) / cfg.scale_theta;
            let dy = (a.y - b.y) / cfg.scale_y;
            da * da + dy * dy
        })
        .sum();
    (out, penalty)
}

/// `beta · Σ_{t=2}^{H-1} ‖u_t − 2u_{t−1} + u_{t−2}‖²` in scaled coordinates.
pub fn smoothness(actions: &[Pose], cfg: &PlannerConfig) -> f64 {
    let u: Vec<[f64; 2]> = actions.iter().map(|&p| cfg.to_scaled(p)).collect();
    let s: f64 = u
        .windows(3)
        .map(|w| (0..2).map(|k| (w[2][k] - 2.0 * w[1][k] + w[0][k]).powi(2)).sum::<f64>())
        .sum();
    cfg.beta * s
}

/// Planning objective: `alpha · S_ε(target, end) + smoothness`.
pub fn cost(target: &PointCloud, end: &PointCloud, actions: &[Pose], cfg: &PlannerConfig) -> Result<f64> {
    let mut ev = SinkhornEvaluator::new(target.clone(), cfg.sinkhorn)?;
    Ok(cfg.alpha * ev.eval(end)?.value + smoothness(actions, cfg))
}

/// Everything the planner needs besides its settings.
#[derive(Clone, Copy)]
pub struct PlanProblem<'a, T: Real> {
    pub model: &'a GnsModel<T>,
    pub scene: &'a SceneConfig,
    /// At least `C + 1` frames ending in the starting state.
    pub history: &'a [Vec<f64>],
    pub material: &'a [Material],
    pub target: &'a PointCloud,
}

/// One scored trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub via: ViaTrajectory,
    pub actions: Vec<Pose>,
    pub cost: f64,
    pub divergence: f64,
    pub smoothness: f64,
    pub penalty: f64,
    /// Predicted granular positions at the final frame.
    #[serde(skip)]
    pub end_cloud: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub best: Evaluation,
    pub history: Vec<GenerationLog>,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// The initial trajectory, scored the same way.
    pub initial: Evaluation,
    /// Best outcome over all seeds.
    pub best: Evaluation,
    pub seeds: Vec<SeedOutcome>,
    pub divergence_mean: f64,
    pub divergence_std: f64,
}

/// Granular positions of a frame.
pub fn granular_points(frame: &[f64], material: &[Material], dim: usize) -> Vec<f64> {
    frame
        .chunks_exact(dim)
        .zip(material)
        .filter(|(_, m)| !m.is_rigid())
        .flat_map(|(p, _)| p.iter().copied())
        .collect()
}

fn rollout_end<T: Real>(p: &PlanProblem<'_, T>, actions: &[Pose]) -> Result<Vec<f64>> {
    let r = rollout(p.model, p.scene, p.history, p.material, actions)?;
    let last = r.frames.last().expect("rollout keeps its first frame");
    Ok(granular_points(last, p.material, p.scene.dim))
}

fn score_batch<T: Real>(
    p: &PlanProblem<'_, T>,
    cfg: &PlannerConfig,
    ev: &mut SinkhornEvaluator,
    vias: Vec<ViaTrajectory>,
) -> Result<Vec<Evaluation>> {
    let prepared: Vec<(ViaTrajectory, f64, Vec<Pose>)> = vias
        .into_iter()
        .map(|v| {
            let (feasible, penalty) = project_constraints(&v, cfg);
            let actions = pchip_interpolate(&feasible.via, cfg.horizon)?;
            Ok((feasible, penalty, actions))
        })
        .collect::<Result<_>>()?;
    let ends: Vec<Vec<f64>> = prepared
        .par_iter()
        .map(|(_, _, a)| rollout_end(p, a))
        .collect::<Result<_>>()?;
    let clouds: Vec<PointCloud> = ends
        .iter()
        .map(|e| PointCloud::new(p.scene.dim, e.clone()))
        .collect::<Result<_>>()?;
    let divs = ev.eval_batch(&clouds);
    prepared
        .into_iter()
        .zip(ends)
        .zip(divs)
        .map(|(((via, penalty, actions), end_cloud), d)| {
            let divergence = d?.value;
            let smooth = smoothness(&actions, cfg);
            Ok(Evaluation {
                cost: cfg.alpha * divergence + smooth + penalty,
                via,
                actions,
                divergence,
                smoothness: smooth,
                penalty,
                end_cloud,
            })
        })
        .collect()
}

/// Scores a single via trajectory with the model rollout.
pub fn evaluate_trajectory<T: Real>(
    p: &PlanProblem<'_, T>,
    via: &ViaTrajectory,
    cfg: &PlannerConfig,
) -> Result<Evaluation> {
    let mut ev = SinkhornEvaluator::new(p.target.clone(), cfg.sinkhorn)?;
    Ok(score_batch(p, cfg, &mut ev, vec![via.clone()])?.remove(0))
}

/// Derivative-free trajectory optimization: CMA-ES over the scaled free
/// via-points, each candidate projected, interpolated, rolled out with the
/// model and scored. Runs once per seed.
pub fn plan_trajectory<T: Real>(
    p: &PlanProblem<'_, T>,
    init: &ViaTrajectory,
    cfg: &PlannerConfig,
) -> Result<PlanResult> {
    cfg.validate()?;
    if init.via.len() != cfg.via_points + 1 {
        return Err(Error::Contract(format!(
            "initial trajectory has {} via-points, expected {}",
            init.via.len(),
            cfg.via_points + 1
        )));
    }
    if p.model.config.dim != p.scene.dim || p.target.dim() != p.scene.dim {
        return Err(Error::Shape("model, scene and target dimensions differ".into()));
    }
    let start = init.via[0];
    let mut ev = SinkhornEvaluator::new(p.target.clone(), cfg.sinkhorn)?;
    let initial = score_batch(p, cfg, &mut ev, vec![init.clone()])?.remove(0);
    let x0 = init.encode(cfg);
    let mut seeds = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let mut best = initial.clone();
        let opts = CmaesOptions {
            population: Some(cfg.population),
            max_generations: cfg.iterations,
            max_evaluations: usize::MAX,
            target: f64::NEG_INFINITY,
            seed,
        };
        let res = cmaes_minimize_batch(
            |xs| {
                let vias = xs.iter().map(|x| ViaTrajectory::decode(start, x, cfg)).collect();
                let scored = score_batch(p, cfg, &mut ev, vias)?;
                let costs = scored.iter().map(|e| e.cost).collect();
                for e in scored {
                    if e.cost < best.cost {
                        best = e;
                    }
                }
                Ok(costs)
            },
            &x0,
            cfg.sigma0,
            &opts,
        )?;
        seeds.push(SeedOutcome {
            seed,
            best,
            history: res.history,
            evaluations: res.evaluations,
        });
    }
    let divs: Vec<f64> = seeds.iter().map(|s| s.best.divergence).collect();
    let mean = divs.iter().sum::<f64>() / divs.len() as f64;
    let std = if divs.len() > 1 {
        (divs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (divs.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let best = seeds
        .iter()
        .map(|s| &s.best)
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .cloned()
        .expect("at least one seed");
    Ok(PlanResult {
        initial,
        best,
        seeds,
        divergence_mean: mean,
        divergence_std: std,
    })
}

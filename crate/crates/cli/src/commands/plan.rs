use std::fs;

use granular_core::datagen::{read_dataset, read_points, write_points, SimulationRecord};
use granular_core::ot::{sinkhorn_divergence, PointCloud, SinkhornConfig};
use granular_core::planner::{granular_points, plan_trajectory, PlanProblem, PlannerConfig, ViaTrajectory};
use granular_core::scene::Pose;
use granular_core::Gns32;
use serde::Serialize;

use super::prepare_out;
use crate::error::{usage, CliResult};
use crate::manifest::Run;
use crate::{svg, PlanArgs};

/// Sinkhorn divergences to the target in the three reported settings.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub s_initial_state: f64,
    pub s_initial_trajectory_end: f64,
    pub s_optimized_end_mean: f64,
    pub s_optimized_end_std: f64,
}

#[derive(Serialize)]
struct Trajectory<'a> {
    start: Pose,
    via: &'a [Pose],
    actions: &'a [Pose],
}

fn record_at(dir: &std::path::Path, idx: usize) -> CliResult<SimulationRecord> {
    let mut records = read_dataset(dir)?;
    if idx >= records.len() {
        return usage(format!("record {idx} out of range for {} records", records.len()));
    }
    Ok(records.swap_remove(idx))
}

pub fn run(args: &PlanArgs) -> CliResult<()> {
    let mut run = Run::start("plan");
    run.input(&args.checkpoint);
    run.input(&args.initial);
    let model = Gns32::load(&args.checkpoint)?;
    let init = record_at(&args.initial, args.record)?;
    let scene = init.config.clone();
    let dim = scene.dim;
    if model.config.dim != dim {
        return usage(format!("model is {}D, scene is {dim}D", model.config.dim));
    }
    let target_points = match (&args.target, &args.target_dataset, args.target_record) {
        (Some(path), _, _) => {
            run.input(path);
            read_points(path)?
        }
        (None, Some(dir), Some(idx)) => {
            run.input(dir);
            let t = record_at(dir, idx)?;
            granular_points(t.frames.last().expect("records hold frames"), &t.material, t.config.dim)
        }
        _ => return usage("a target file or a target dataset record is required"),
    };
    if target_points.is_empty() || target_points.len() % dim != 0 {
        return usage(format!(
            "target holds {} values, not a {dim}D cloud",
            target_points.len()
        ));
    }
    let target = PointCloud::new(dim, target_points)?;
    let sinkhorn = match args.epsilon {
        Some(e) if e > 0.0 => SinkhornConfig::new(e),
        Some(_) => return usage("--epsilon must be positive"),
        None => SinkhornConfig::for_diagonal(scene.diagonal()),
    };
    let horizon = init.actions.len();
    let mut cfg = PlannerConfig::new(horizon, sinkhorn);
    cfg.population = args.population;
    cfg.iterations = args.iters;
    cfg.via_points = args.via_points;
    cfg.seeds = (0..args.seeds).collect();
    if let Some(v) = args.sigma0 {
        cfg.sigma0 = v;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = v;
    }
    cfg.validate()?;
    let via = ViaTrajectory::from_actions(init.start, &init.actions, cfg.via_points)?;
    let history = vec![init.frames[0].clone(); model.config.history + 1];
    prepare_out(&args.out)?;
    let problem = PlanProblem {
        model: &model,
        scene: &scene,
        history: &history,
        material: &init.material,
        target: &target,
    };
    let result = plan_trajectory(&problem, &via, &cfg)?;
    let start_cloud = PointCloud::new(dim, granular_points(&init.frames[0], &init.material, dim))?;
    let summary = Summary {
        s_initial_state: sinkhorn_divergence(&target, &start_cloud, &sinkhorn)?.value,
        s_initial_trajectory_end: result.initial.divergence,
        s_optimized_end_mean: result.divergence_mean,
        s_optimized_end_std: result.divergence_std,
    };
    let best = &result.best;
    let traj = Trajectory {
        start: init.start,
        via: &best.via.via,
        actions: &best.actions,
    };
    fs::write(args.out.join("trajectory.json"), serde_json::to_string_pretty(&traj)?)?;
    fs::write(
        args.out.join("diagnostics.json"),
        serde_json::to_string_pretty(&result)?,
    )?;
    fs::write(args.out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    write_points(&args.out.join("predicted.f32"), &best.end_cloud)?;
    if args.emit_plots {
        let doc = svg::scatter(
            dim,
            &[
                ("target", "#1f77b4", target.points()),
                ("predicted", "#d62728", &best.end_cloud),
            ],
        );
        fs::write(args.out.join("clouds.svg"), doc)?;
    }
    run.finish(&args.out, &cfg, cfg.seeds.clone())?;
    println!(
        "S(target, start) {:.4e}  S(target, initial end) {:.4e}  S(target, optimized end) {:.4e} ± {:.1e}",
        summary.s_initial_state,
        summary.s_initial_trajectory_end,
        summary.s_optimized_end_mean,
        summary.s_optimized_end_std
    );
    Ok(())
}

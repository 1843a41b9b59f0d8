use super::infer::Workspace;
use super::model::GnsModel;
use crate::error::{Error, Result};
use crate::graph::{build_graph_frames, GraphFrames};
use crate::scalar::Real;
use crate::scene::{Material, ParticleState, Pose, SceneConfig};

/// Semi-implicit Euler: velocity first, then position with the new velocity.
pub fn integrate(state: &ParticleState, accel: &[f64], dt: f64) -> ParticleState {
    let mut out = state.clone();
    for ((x, v), a) in out.positions.iter_mut().zip(out.velocities.iter_mut()).zip(accel) {
        *v += dt * a;
        *x += dt * *v;
    }
    out.t += 1;
    out
}

/// Predicted trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    /// Position frames, starting with the last history frame.
    pub frames: Vec<Vec<f64>>,
    /// Predicted velocity change per frame for every particle, one entry
    /// per step.
    pub accels: Vec<Vec<f64>>,
}

/// Overwrites the rigid entries of `frame` with the cup surface at `pose`.
pub fn place_rigid(frame: &mut [f64], material: &[Material], pose: Pose, scene: &SceneConfig) {
    let d = scene.dim;
    let pts = scene.cup.world_points(pose);
    let mut k = 0;
    for (i, m) in material.iter().enumerate() {
        if m.is_rigid() {
            frame[i * d..(i + 1) * d].copy_from_slice(&pts[k * d..(k + 1) * d]);
            k += 1;
        }
    }
}

/// Autoregressive prediction along a pose sequence.
///
/// `history` holds at least `C + 1` frames, oldest first; the last one is
/// the starting state. `actions[t]` is the cup pose of frame `t + 1`. Cup
/// particles follow the actions exactly; granular particles move by the
/// model's accelerations.
pub fn rollout<T: Real>(
    model: &GnsModel<T>,
    scene: &SceneConfig,
    history: &[Vec<f64>],
    material: &[Material],
    actions: &[Pose],
) -> Result<Rollout> {
    let c = model.config.history;
    let d = scene.dim;
    if model.config.dim != d {
        return Err(Error::Shape("model and scene dimensions differ".into()));
    }
    if history.len() < c + 1 {
        return Err(Error::Contract(format!(
            "rollout needs {} history frames, got {}",
            c + 1,
            history.len()
        )));
    }
    let mut window: Vec<Vec<f64>> = history[history.len() - c - 1..].to_vec();
    let dt = scene.frame_dt();
    let features = model.config.features();
    let mut frames = vec![window[c].clone()];
    let mut accels = Vec::with_capacity(actions.len());
    let mut ws = Workspace::new();
    for &pose in actions {
        let last = &window[c];
        let mut next = last.clone();
        place_rigid(&mut next, material, pose, scene);
        let refs: Vec<&[f64]> = window.iter().map(|f| f.as_slice()).collect();
        let graph = build_graph_frames::<T>(
            GraphFrames {
                history: &refs,
                next: &next,
                material,
                with_target: false,
            },
            scene,
            &model.norm,
            &features,
        )?;
        let dv = model.denormalize(&model.predict_with(&graph, &mut ws)?);
        let prev = &window[c - 1];
        let mut state = ParticleState::new(d, last.clone(), material.to_vec());
        for (v, (x, p)) in state.velocities.iter_mut().zip(last.iter().zip(prev)) {
            *v = (x - p) / dt;
        }
        let a: Vec<f64> = dv.iter().map(|x| x / dt).collect();
        let stepped = integrate(&state, &a, dt);
        for (i, m) in material.iter().enumerate() {
            if !m.is_rigid() {
                next[i * d..(i + 1) * d].copy_from_slice(stepped.pos(i));
            }
        }
        accels.push(dv);
        window.remove(0);
        window.push(next.clone());
        frames.push(next);
    }
    Ok(Rollout { frames, accels })
}

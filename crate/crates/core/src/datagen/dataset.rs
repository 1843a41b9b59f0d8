use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::{make_trajectory, noise_trajectory, FamilyKind, FamilyRanges, TrajectoryFamily};
use crate::error::{Error, Result};
use crate::graph::TrajectoryView;
use crate::scene::{advance_frame, init_scene, settle, ActionBounds, Material, ParticleState, Pose, SceneConfig};

/// Settling stops once granular kinetic energy per particle stays below this, joules.
pub const SETTLE_KE_PER_PARTICLE: f64 = 1e-9;

/// How a record's actions were produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum RecordKind {
    Family(TrajectoryFamily),
    /// The cup only jitters around its start pose.
    NoiseOnly {
        theta_std: f64,
        y_std: f64,
        seed: u64,
    },
    /// The cup is removed after settling and the material falls freely.
    NoCup,
}

impl RecordKind {
    pub fn label(&self) -> String {
        match self {
            RecordKind::Family(f) => f.kind.name().to_string(),
            RecordKind::NoiseOnly { .. } => "noise-only".into(),
            RecordKind::NoCup => "no-cup".into(),
        }
    }
}

/// One simulated episode: `actions[t]` is the cup pose at frame `t + 1` and
/// `frames[t]` holds all particle positions at frame `t`.
///
/// Frames are stored rounded to `f32`. Frame 0 is the exact starting state
/// (velocities zero), so replaying the actions reproduces every frame bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationRecord {
    pub config: SceneConfig,
    pub kind: RecordKind,
    pub start: Pose,
    pub actions: Vec<Pose>,
    pub frames: Vec<Vec<f64>>,
    pub material: Vec<Material>,
}

impl SimulationRecord {
    pub fn num_particles(&self) -> usize {
        self.material.len()
    }

    pub fn view(&self) -> TrajectoryView<'_> {
        TrajectoryView {
            frames: &self.frames,
            material: &self.material,
        }
    }

    /// Particle state at frame `t` with zero velocities.
    pub fn state(&self, t: usize) -> ParticleState {
        let mut s = ParticleState::new(self.config.dim, self.frames[t].clone(), self.material.clone());
        s.t = t;
        s
    }

    /// Granular positions at frame `t`, flattened.
    pub fn granular_positions(&self, t: usize) -> Vec<f64> {
        let d = self.config.dim;
        self.frames[t]
            .chunks_exact(d)
            .zip(&self.material)
            .filter(|(_, m)| !m.is_rigid())
            .flat_map(|(p, _)| p.iter().copied())
            .collect()
    }
}

fn round_f32(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x as f32 as f64).collect()
}

/// Runs the contact simulation from `initial` through `actions`, returning
/// the `f32`-rounded frames including the initial one.
pub fn simulate_actions(
    initial: &ParticleState,
    start: Pose,
    actions: &[Pose],
    config: &SceneConfig,
) -> Result<Vec<Vec<f64>>> {
    let mut frames = Vec::with_capacity(actions.len() + 1);
    frames.push(round_f32(&initial.positions));
    let mut state = initial.clone();
    let mut pose = start;
    for &next in actions {
        state = advance_frame(&state, pose, next, config)?;
        pose = next;
        frames.push(round_f32(&state.positions));
    }
    Ok(frames)
}

/// Re-simulates a record from its first frame.
pub fn replay(record: &SimulationRecord) -> Result<Vec<Vec<f64>>> {
    simulate_actions(&record.state(0), record.start, &record.actions, &record.config)
}

/// Cup filled with material and settled at its start pose, positions rounded
/// to `f32` and velocities zeroed.
pub fn settled_start(config: &SceneConfig, seed: u64) -> Result<ParticleState> {
    let init = init_scene(config, seed)?;
    let threshold = SETTLE_KE_PER_PARTICLE * init.count(Material::Granular).max(1) as f64;
    let settled = settle(&init, config, threshold)?;
    let mut state = settled.state.quiesced();
    state.t = 0;
    Ok(state)
}

/// Plan for one record before simulation.
#[derive(Clone, Debug)]
struct RecordPlan {
    kind: RecordKind,
    init_seed: u64,
}

fn sim_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Options for [`generate_dataset_with`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatagenOptions {
    pub ranges: FamilyRanges,
    pub bounds: ActionBounds,
    /// Restrict family records to these kinds; empty means all four.
    pub families: Vec<FamilyKind>,
    /// Jitter of the noise-only record, radians and meters.
    pub noise_only_std: (f64, f64),
    /// Emit the noise-only and no-cup records.
    pub special_records: bool,
}

impl Default for DatagenOptions {
    fn default() -> Self {
        DatagenOptions {
            ranges: FamilyRanges::default(),
            bounds: ActionBounds::default(),
            families: Vec::new(),
            noise_only_std: (0.01, 1e-3),
            special_records: true,
        }
    }
}

/// `n_sims - 2` family records drawn uniformly over the four families, then
/// the noise-only record and the no-cup record.
pub fn generate_dataset(config: &SceneConfig, n_sims: usize, seed: u64) -> Result<Vec<SimulationRecord>> {
    generate_dataset_with(config, n_sims, seed, &DatagenOptions::default())
}

pub fn generate_dataset_with(
    config: &SceneConfig,
    n_sims: usize,
    seed: u64,
    opts: &DatagenOptions,
) -> Result<Vec<SimulationRecord>> {
    let mut config = config.clone();
    config.validate()?;
    let special = if opts.special_records { 2 } else { 0 };
    if n_sims < special {
        return Err(Error::Config(format!("n_sims {n_sims} is below {special}")));
    }
    let kinds: &[FamilyKind] = if opts.families.is_empty() {
        &FamilyKind::ALL
    } else {
        &opts.families
    };
    let mut plans = Vec::with_capacity(n_sims);
    for i in 0..n_sims - special {
        let mut rng = sim_rng(seed, i);
        let kind = kinds[rng.random_range(0..kinds.len())];
        let fam = TrajectoryFamily::sample_feasible(
            kind,
            &opts.ranges,
            config.horizon,
            config.frame_dt(),
            &opts.bounds,
            &mut rng,
        )?;
        plans.push(RecordPlan {
            kind: RecordKind::Family(fam),
            init_seed: rng.random(),
        });
    }
    if opts.special_records {
        let mut rng = sim_rng(seed, n_sims - 2);
        plans.push(RecordPlan {
            kind: RecordKind::NoiseOnly {
                theta_std: opts.noise_only_std.0,
                y_std: opts.noise_only_std.1,
                seed: rng.random(),
            },
            init_seed: rng.random(),
        });
        let mut rng = sim_rng(seed, n_sims - 1);
        plans.push(RecordPlan {
            kind: RecordKind::NoCup,
            init_seed: rng.random(),
        });
    }
    plans
        .into_par_iter()
        .map(|plan| simulate_plan(&config, plan, &opts.bounds))
        .collect()
}

fn simulate_plan(config: &SceneConfig, plan: RecordPlan, bounds: &ActionBounds) -> Result<SimulationRecord> {
    let start = config.cup.initial_pose;
    let h = config.horizon;
    let mut initial = settled_start(config, plan.init_seed)?;
    let actions = match &plan.kind {
        RecordKind::Family(f) => make_trajectory(f, h, config.frame_dt(), start, bounds)?,
        RecordKind::NoiseOnly { theta_std, y_std, seed } => {
            noise_trajectory(h, *theta_std, *y_std, start, bounds, *seed)?
        }
        RecordKind::NoCup => {
            initial = initial.retain_material(Material::Granular);
            vec![start; h]
        }
    };
    bounds.check(start, &actions)?;
    let frames = simulate_actions(&initial, start, &actions, config)?;
    Ok(SimulationRecord {
        config: config.clone(),
        kind: plan.kind,
        start,
        actions,
        frames,
        material: initial.material,
    })
}

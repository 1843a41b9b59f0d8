use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{GnsConfig, GnsModel};
use crate::error::{Error, Result};
use crate::graph::{
    add_training_noise, build_graph_frames, compute_norm_stats, GraphFrames, GraphSample, TrajectoryView,
};
use crate::nn::{adam_step, AdamState, LrSchedule};
use crate::scalar::Real;
use crate::scene::SceneConfig;

/// Optimization settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Samples drawn without replacement per epoch (capped at the total).
    pub samples_per_epoch: usize,
    pub batch_size: usize,
    /// Total random-walk noise over the history window, meters.
    pub noise_std: f64,
    pub seed: u64,
    pub schedule: LrSchedule,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 2000,
            samples_per_epoch: 5000,
            batch_size: 2,
            noise_std: 3e-4,
            seed: 0,
            schedule: LrSchedule::default(),
        }
    }
}

/// One training sample: trajectory index and the newest history frame.
pub type SamplePoint = (usize, usize);

/// Every `(trajectory, frame)` pair with a full history and a next frame.
pub fn sample_points(data: &[TrajectoryView<'_>], history: usize) -> Vec<SamplePoint> {
    let mut out = Vec::new();
    for (r, t) in data.iter().enumerate() {
        for k in history..t.frames.len().saturating_sub(1) {
            out.push((r, k));
        }
    }
    out
}

/// Graph of one sample, optionally with training noise on the history.
pub fn sample_graph<T: Real>(
    model: &GnsModel<T>,
    data: &[TrajectoryView<'_>],
    scene: &SceneConfig,
    point: SamplePoint,
    noise: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<GraphSample<T>> {
    let (r, k) = point;
    let c = model.config.history;
    let traj = data[r];
    let mut hist: Vec<Vec<f64>> = traj.frames[k - c..=k].to_vec();
    let mut next = traj.frames[k + 1].clone();
    if let Some((sigma, rng)) = noise {
        let shift = add_training_noise(&mut hist, traj.material, scene.dim, sigma, rng);
        for (x, s) in next.iter_mut().zip(&shift) {
            *x += s;
        }
    }
    let refs: Vec<&[f64]> = hist.iter().map(|f| f.as_slice()).collect();
    build_graph_frames(
        GraphFrames {
            history: &refs,
            next: &next,
            material: traj.material,
            with_target: true,
        },
        scene,
        &model.norm,
        &model.config.features(),
    )
}

/// Trains `model` in place and returns the mean minibatch loss per epoch.
pub fn train<T: Real>(
    model: &mut GnsModel<T>,
    data: &[TrajectoryView<'_>],
    scene: &SceneConfig,
    opts: &TrainOptions,
) -> Result<Vec<f64>> {
    if opts.epochs == 0 {
        return Ok(Vec::new());
    }
    let points = sample_points(data, model.config.history);
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut adam = AdamState::new(&model.params);
    let per_epoch = opts.samples_per_epoch.clamp(1, points.len());
    let batch = opts.batch_size.max(1);
    let mut curve = Vec::with_capacity(opts.epochs);
    let mut order = points.clone();
    for epoch in 1..=opts.epochs {
        order.shuffle(&mut rng);
        let lr = opts.schedule.at(epoch);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order[..per_epoch].chunks(batch) {
            let mut parts = Vec::with_capacity(chunk.len());
            for &p in chunk {
                parts.push(sample_graph(model, data, scene, p, Some((opts.noise_std, &mut rng)))?);
            }
            let g = GraphSample::batch(&parts)?;
            let (loss, grads) = model.loss_and_grad(&g)?;
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            adam_step(&mut model.params, grads.params(), &mut adam, lr)?;
            total += loss;
            batches += 1;
        }
        curve.push(total / batches as f64);
    }
    Ok(curve)
}

/// Computes normalization statistics, initializes a model from `seed` and
/// trains it.
pub fn train_model<T: Real>(
    data: &[TrajectoryView<'_>],
    scene: &SceneConfig,
    config: GnsConfig,
    opts: &TrainOptions,
) -> Result<(GnsModel<T>, Vec<f64>)> {
    let norm = compute_norm_stats(data, scene.dim, scene.frame_dt())?;
    let mut model = GnsModel::new(config, norm, opts.seed)?;
    let curve = train(&mut model, data, scene, opts)?;
    Ok((model, curve))
}

/// Mean noise-free one-step loss over the given samples.
pub fn one_step_loss<T: Real>(
    model: &GnsModel<T>,
    data: &[TrajectoryView<'_>],
    scene: &SceneConfig,
    points: &[SamplePoint],
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for &p in points {
        let g = sample_graph(model, data, scene, p, None)?;
        total += model.loss_value(&g)?.as_f64();
    }
    Ok(total / points.len() as f64)
}

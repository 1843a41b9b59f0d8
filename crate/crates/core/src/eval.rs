//! Rollout accuracy against ground-truth records and summary statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::SimulationRecord;
use crate::error::{Error, Result};
use crate::gns::{rollout, GnsModel, Rollout};
use crate::ot::{exact_w2, PointCloud, EXACT_MAX_POINTS};
use crate::planner::granular_points;
use crate::scalar::Real;
use crate::scene::Material;

/// Five-number summary plus mean; quartiles interpolate linearly between
/// order statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl BoxStats {
    pub const HEADER: [&'static str; 6] = ["min", "q1", "median", "q3", "max", "mean"];

    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Ok(BoxStats {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }

    pub fn values(&self) -> [f64; 6] {
        [self.min, self.q1, self.median, self.q3, self.max, self.mean]
    }
}

/// Exact W2 between the granular particles of two frames. Clouds above the
/// solver limit are thinned to every k-th granular particle in both frames.
pub fn granular_w2(a: &[f64], b: &[f64], material: &[Material], dim: usize) -> Result<f64> {
    let pa = granular_points(a, material, dim);
    let pb = granular_points(b, material, dim);
    let n = pa.len() / dim;
    if n == 0 {
        return Ok(0.0);
    }
    let stride = n.div_ceil(EXACT_MAX_POINTS);
    let thin = |p: &[f64]| -> Vec<f64> { p.chunks_exact(dim).step_by(stride).flatten().copied().collect() };
    exact_w2(&PointCloud::new(dim, thin(&pa))?, &PointCloud::new(dim, thin(&pb))?)
}

/// Model rollout along a recorded episode.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordRollout {
    /// Frame index of the rollout's first frame in the record (`C`).
    pub start: usize,
    pub rollout: Rollout,
    /// W2 to ground truth for each predicted frame `start + 1 ..= H`.
    pub w2: Vec<f64>,
}

impl RecordRollout {
    pub fn final_w2(&self) -> f64 {
        self.w2.last().copied().unwrap_or(0.0)
    }

    pub fn mean_w2(&self) -> f64 {
        if self.w2.is_empty() {
            0.0
        } else {
            self.w2.iter().sum::<f64>() / self.w2.len() as f64
        }
    }
}

/// Seeds the model with the first `C + 1` recorded frames and rolls it out
/// along the remaining recorded actions.
pub fn rollout_record<T: Real>(model: &GnsModel<T>, record: &SimulationRecord) -> Result<RecordRollout> {
    let c = model.config.history;
    if record.frames.len() < c + 2 {
        return Err(Error::Contract(format!(
            "record with {} frames is too short for history {c}",
            record.frames.len()
        )));
    }
    let r = rollout(
        model,
        &record.config,
        &record.frames[..=c],
        &record.material,
        &record.actions[c..],
    )?;
    let w2 = r.frames[1..]
        .iter()
        .zip(&record.frames[c + 1..])
        .map(|(p, t)| granular_w2(p, t, &record.material, record.config.dim))
        .collect::<Result<Vec<_>>>()?;
    Ok(RecordRollout {
        start: c,
        rollout: r,
        w2,
    })
}

/// `rollout_record` over several records in parallel, results in input order.
pub fn rollout_records<T: Real>(model: &GnsModel<T>, records: &[&SimulationRecord]) -> Result<Vec<RecordRollout>> {
    records.par_iter().map(|r| rollout_record(model, r)).collect()
}

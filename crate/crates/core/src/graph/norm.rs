use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::Material;

/// Smallest standard deviation used for normalization.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-axis statistics of granular velocities (m/s) and accelerations
/// (velocity change per frame, m/s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub vel_mean: Vec<f64>,
    pub vel_std: Vec<f64>,
    pub acc_mean: Vec<f64>,
    pub acc_std: Vec<f64>,
}

impl NormStats {
    /// Zero mean and unit scale.
    pub fn identity(dim: usize) -> Self {
        NormStats {
            vel_mean: vec![0.0; dim],
            vel_std: vec![1.0; dim],
            acc_mean: vec![0.0; dim],
            acc_std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.vel_mean.len()
    }
}

/// A recorded trajectory: position frames (flat, `dim` per particle) and
/// the material of every particle.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryView<'a> {
    pub frames: &'a [Vec<f64>],
    pub material: &'a [Material],
}

struct Moments {
    n: usize,
    sum: Vec<f64>,
}

/// Mean and floored standard deviation of finite-difference velocities and
/// accelerations over every granular particle and frame.
pub fn compute_norm_stats(trajectories: &[TrajectoryView<'_>], dim: usize, dt: f64) -> Result<NormStats> {
    let granular = |t: &TrajectoryView<'_>| -> Vec<usize> {
        (0..t.material.len())
            .filter(|&i| t.material[i] == Material::Granular)
            .collect()
    };
    // each visitor receives one sample per granular particle and axis
    let visit = |order: usize, f: &mut dyn FnMut(usize, f64)| {
        for t in trajectories {
            let g = granular(t);
            if t.frames.len() <= order {
                continue;
            }
            for k in 0..t.frames.len() - order {
                for &i in &g {
                    for a in 0..dim {
                        let x = |s: usize| t.frames[k + s][i * dim + a];
                        let v = if order == 1 {
                            (x(1) - x(0)) / dt
                        } else {
                            ((x(2) - x(1)) - (x(1) - x(0))) / dt
                        };
                        f(a, v);
                    }
                }
            }
        }
    };
    let stats = |order: usize| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut m = Moments {
            n: 0,
            sum: vec![0.0; dim],
        };
        visit(order, &mut |a, v| {
            m.sum[a] += v;
            if a == 0 {
                m.n += 1;
            }
        });
        if m.n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mean: Vec<f64> = m.sum.iter().map(|s| s / m.n as f64).collect();
        let mut sq = vec![0.0; dim];
        visit(order, &mut |a, v| sq[a] += (v - mean[a]) * (v - mean[a]));
        let std = sq.iter().map(|s| (s / m.n as f64).sqrt().max(STD_FLOOR)).collect();
        Ok((mean, std))
    };
    let (vel_mean, vel_std) = stats(1)?;
    let (acc_mean, acc_std) = stats(2)?;
    Ok(NormStats {
        vel_mean,
        vel_std,
        acc_mean,
        acc_std,
    })
}

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::neighbors::find_neighbors;
use super::norm::NormStats;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::scalar::Real;
use crate::scene::{Material, ParticleState, SceneConfig};

/// Which node features a graph carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Number of past velocities per node, `C`.
    pub history: usize,
    /// Whether rigid nodes carry their commanded velocity.
    pub use_controls: bool,
}

impl FeatureConfig {
    /// Node attribute width: velocity history, wall distances, material
    /// flag and, with controls, the commanded velocity.
    pub fn node_width(&self, dim: usize) -> usize {
        dim * self.history + (2 * dim - 1) + 1 + if self.use_controls { dim } else { 0 }
    }

    pub fn edge_width(&self, dim: usize) -> usize {
        dim + 1
    }
}

/// One model input graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSample<T> {
    pub senders: Arc<[usize]>,
    pub receivers: Arc<[usize]>,
    /// `N × D` node attributes.
    pub nodes: Tensor<T>,
    /// `M × F` edge attributes.
    pub edges: Tensor<T>,
    /// `N × dim` normalized accelerations, when a next frame was given.
    pub target_accel: Option<Tensor<T>>,
    pub material: Vec<Material>,
}

impl<T: Real> GraphSample<T> {
    pub fn num_nodes(&self) -> usize {
        self.material.len()
    }

    pub fn num_edges(&self) -> usize {
        self.senders.len()
    }

    /// Disjoint union of several graphs with node indices offset in order.
    pub fn batch(parts: &[GraphSample<T>]) -> Result<GraphSample<T>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("cannot batch zero graphs".into()))?;
        let mut senders = Vec::new();
        let mut receivers = Vec::new();
        let mut material = Vec::new();
        let mut offset = 0;
        for p in parts {
            senders.extend(p.senders.iter().map(|s| s + offset));
            receivers.extend(p.receivers.iter().map(|r| r + offset));
            material.extend_from_slice(&p.material);
            offset += p.num_nodes();
        }
        let nodes = Tensor::vstack(&parts.iter().map(|p| &p.nodes).collect::<Vec<_>>())?;
        let edges = Tensor::vstack(&parts.iter().map(|p| &p.edges).collect::<Vec<_>>())?;
        let target_accel = if first.target_accel.is_some() {
            let t: Option<Vec<&Tensor<T>>> = parts.iter().map(|p| p.target_accel.as_ref()).collect();
            let t = t.ok_or_else(|| Error::Contract("mixed graphs with and without targets".into()))?;
            Some(Tensor::vstack(&t)?)
        } else {
            None
        };
        Ok(GraphSample {
            senders: senders.into(),
            receivers: receivers.into(),
            nodes,
            edges,
            target_accel,
            material,
        })
    }
}

/// Wall distances of one position divided by `radius` and clipped to
/// `[-1, 1]`, one entry per closed wall.
pub fn boundary_distances(position: &[f64], config: &SceneConfig, radius: f64) -> Vec<f64> {
    config
        .walls()
        .into_iter()
        .map(|w| (config.wall_distance(position, w) / radius).clamp(-1.0, 1.0))
        .collect()
}

/// Positions from which a graph is built.
#[derive(Clone, Copy, Debug)]
pub struct GraphFrames<'a> {
    /// `C + 1` consecutive position frames, oldest first.
    pub history: &'a [&'a [f64]],
    /// Positions one frame ahead. Rigid entries drive the control input;
    /// granular entries define the target when `with_target` is set.
    pub next: &'a [f64],
    pub material: &'a [Material],
    pub with_target: bool,
}

/// Builds node and edge attributes from position frames.
pub fn build_graph_frames<T: Real>(
    frames: GraphFrames<'_>,
    config: &SceneConfig,
    norm: &NormStats,
    features: &FeatureConfig,
) -> Result<GraphSample<T>> {
    let d = config.dim;
    let c = features.history;
    let n = frames.material.len();
    if c == 0 {
        return Err(Error::Config("velocity history length must be at least 1".into()));
    }
    if frames.history.len() != c + 1 {
        return Err(Error::Contract(format!(
            "graph needs {} history frames, got {}",
            c + 1,
            frames.history.len()
        )));
    }
    if frames.history.iter().any(|h| h.len() != n * d) || frames.next.len() != n * d {
        return Err(Error::Shape("position frames do not match the particle count".into()));
    }
    if norm.dim() != d {
        return Err(Error::Shape("normalization statistics have the wrong dimension".into()));
    }
    let dt = config.frame_dt();
    let r = config.connectivity_radius;
    let last = frames.history[c];
    let width = features.node_width(d);
    let mut nodes = Vec::with_capacity(n * width);
    for i in 0..n {
        for k in 0..c {
            for a in 0..d {
                let j = i * d + a;
                let v = (frames.history[k + 1][j] - frames.history[k][j]) / dt;
                nodes.push(T::lit((v - norm.vel_mean[a]) / norm.vel_std[a]));
            }
        }
        for b in boundary_distances(&last[i * d..(i + 1) * d], config, r) {
            nodes.push(T::lit(b));
        }
        let rigid = frames.material[i].is_rigid();
        nodes.push(if rigid { T::one() } else { T::zero() });
        if features.use_controls {
            for a in 0..d {
                let j = i * d + a;
                nodes.push(if rigid {
                    T::lit((frames.next[j] - last[j]) / dt / norm.vel_std[a])
                } else {
                    T::zero()
                });
            }
        }
    }

    let pairs = find_neighbors(last, d, r);
    let mut edges = Vec::with_capacity(pairs.len() * (d + 1));
    let mut senders = Vec::with_capacity(pairs.len());
    let mut receivers = Vec::with_capacity(pairs.len());
    for &(s, t) in &pairs {
        let mut n2 = 0.0;
        for a in 0..d {
            let x = (last[s * d + a] - last[t * d + a]) / r;
            n2 += x * x;
            edges.push(T::lit(x));
        }
        edges.push(T::lit(n2.sqrt()));
        senders.push(s);
        receivers.push(t);
    }

    let target_accel = if frames.with_target {
        let prev = frames.history[c - 1];
        let mut t = Vec::with_capacity(n * d);
        for i in 0..n {
            for a in 0..d {
                let j = i * d + a;
                let acc = ((frames.next[j] - last[j]) - (last[j] - prev[j])) / dt;
                t.push(T::lit((acc - norm.acc_mean[a]) / norm.acc_std[a]));
            }
        }
        Some(Tensor::from_vec(&[n, d], t)?)
    } else {
        None
    };

    Ok(GraphSample {
        senders: senders.into(),
        receivers: receivers.into(),
        nodes: Tensor::from_vec(&[n, width], nodes)?,
        edges: Tensor::from_vec(&[pairs.len(), d + 1], edges)?,
        target_accel,
        material: frames.material.to_vec(),
    })
}

/// Builds a training graph from `C + 1` consecutive states and the state
/// that follows them.
pub fn build_graph<T: Real>(
    history: &[ParticleState],
    next: &ParticleState,
    config: &SceneConfig,
    norm: &NormStats,
    features: &FeatureConfig,
) -> Result<GraphSample<T>> {
    let mut chain: Vec<&ParticleState> = history.iter().collect();
    chain.push(next);
    let consecutive = chain
        .windows(2)
        .all(|w| w[1].t == w[0].t + 1 && w[1].material == w[0].material);
    if history.is_empty() || !consecutive {
        return Err(Error::Contract("history states are not consecutive".into()));
    }
    let positions: Vec<&[f64]> = history.iter().map(|s| s.positions.as_slice()).collect();
    build_graph_frames(
        GraphFrames {
            history: &positions,
            next: &next.positions,
            material: &next.material,
            with_target: true,
        },
        config,
        norm,
        features,
    )
}

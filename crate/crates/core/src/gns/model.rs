use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureConfig, GraphSample, NormStats};
use crate::nn::checkpoint::{read_checkpoint, write_checkpoint};
use crate::nn::{Gradients, Mlp, ParamSet, Tape, Tensor, Var};
use crate::scalar::Real;

/// Which particles contribute to the training loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossVariant {
    /// Granular particles only.
    #[serde(rename = "g")]
    Granular,
    /// Granular and rigid particles.
    #[serde(rename = "g+r")]
    GranularRigid,
}

impl std::str::FromStr for LossVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g" => Ok(LossVariant::Granular),
            "g+r" => Ok(LossVariant::GranularRigid),
            other => Err(Error::Config(format!("unknown loss variant {other:?}"))),
        }
    }
}

/// Architecture and feature options of the learned simulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnsConfig {
    pub dim: usize,
    /// Number of interaction networks, `K`.
    pub message_passing_steps: usize,
    /// Velocity history length, `C`.
    pub history: usize,
    pub latent_width: usize,
    pub hidden_width: usize,
    /// Hidden layers per MLP.
    pub hidden_layers: usize,
    pub use_controls: bool,
    pub loss: LossVariant,
}

impl GnsConfig {
    /// `K = 10`, `C = 5`, width 128, controls on, granular loss.
    pub fn flagship(dim: usize) -> Self {
        GnsConfig {
            dim,
            message_passing_steps: 10,
            history: 5,
            latent_width: 128,
            hidden_width: 128,
            hidden_layers: 2,
            use_controls: true,
            loss: LossVariant::Granular,
        }
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            history: self.history,
            use_controls: self.use_controls,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 2 || self.dim == 3) {
            return Err(Error::Config(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if self.history == 0 || self.latent_width < 2 || self.hidden_width == 0 {
            return Err(Error::Config("history and widths must be positive".into()));
        }
        Ok(())
    }

    fn widths(&self, input: usize, output: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        w.push(output);
        w
    }
}

/// Edge and node networks of one message-passing step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interaction {
    pub edge: Mlp,
    pub node: Mlp,
}

/// Encoder, processor and decoder weights plus normalization statistics.
#[derive(Clone, Debug)]
pub struct GnsModel<T: Real> {
    pub config: GnsConfig,
    pub norm: NormStats,
    pub params: ParamSet<T>,
    pub node_encoder: Mlp,
    pub edge_encoder: Mlp,
    pub processor: Vec<Interaction>,
    pub decoder: Mlp,
}

/// Latent node and edge matrices on a recording.
#[derive(Clone, Copy, Debug)]
pub struct Latent {
    pub nodes: Var,
    pub edges: Var,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    config: GnsConfig,
    norm: NormStats,
}

impl<T: Real> GnsModel<T> {
    /// Freshly initialized model; weights depend only on `seed`.
    pub fn new(config: GnsConfig, norm: NormStats, seed: u64) -> Result<Self> {
        config.validate()?;
        if norm.dim() != config.dim {
            return Err(Error::Shape("normalization statistics have the wrong dimension".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let d = config.dim;
        let l = config.latent_width;
        let f = config.features();
        let node_encoder = Mlp::new(
            &mut params,
            "encoder.node",
            &config.widths(f.node_width(d), l),
            true,
            &mut rng,
        );
        let edge_encoder = Mlp::new(
            &mut params,
            "encoder.edge",
            &config.widths(f.edge_width(d), l),
            true,
            &mut rng,
        );
        let processor = (0..config.message_passing_steps)
            .map(|k| Interaction {
                edge: Mlp::new(
                    &mut params,
                    &format!("processor.{k}.edge"),
                    &config.widths(3 * l, l),
                    true,
                    &mut rng,
                ),
                node: Mlp::new(
                    &mut params,
                    &format!("processor.{k}.node"),
                    &config.widths(2 * l, l),
                    true,
                    &mut rng,
                ),
            })
            .collect();
        let decoder = Mlp::new(&mut params, "decoder", &config.widths(l, d), false, &mut rng);
        Ok(GnsModel {
            config,
            norm,
            params,
            node_encoder,
            edge_encoder,
            processor,
            decoder,
        })
    }

    pub(crate) fn check_widths(&self, g: &GraphSample<T>) -> Result<()> {
        let f = self.config.features();
        let d = self.config.dim;
        let (n, m) = (g.num_nodes(), g.num_edges());
        if g.nodes.cols() != f.node_width(d) || g.nodes.rows() != n {
            return Err(Error::Shape(format!(
                "node attributes are {:?}, model expects width {}",
                g.nodes.shape(),
                f.node_width(d)
            )));
        }
        if (m > 0 && g.edges.cols() != f.edge_width(d)) || g.edges.rows() != m || g.receivers.len() != m {
            return Err(Error::Shape(format!(
                "edge attributes are {:?}, model expects width {}",
                g.edges.shape(),
                f.edge_width(d)
            )));
        }
        Ok(())
    }

    /// Maps node and edge attributes into the latent space.
    pub fn encode(&self, tape: &mut Tape<'_, T>, g: &GraphSample<T>) -> Result<Latent> {
        self.check_widths(g)?;
        let v = tape.input(g.nodes.clone());
        let e = tape.input(g.edges.clone());
        Ok(Latent {
            nodes: self.node_encoder.forward(tape, v)?,
            edges: self.edge_encoder.forward(tape, e)?,
        })
    }

    /// Runs the interaction networks with residual node and edge updates.
    pub fn process(&self, tape: &mut Tape<'_, T>, g: &GraphSample<T>, latent: Latent) -> Result<Latent> {
        let l = self.config.latent_width;
        let n = g.num_nodes();
        let Latent { mut nodes, mut edges } = latent;
        for block in &self.processor {
            // first edge layer evaluated piecewise over [edge, sender, receiver]
            let first = block.edge.layers[0];
            let (w, b) = (tape.param(first.w), tape.param(first.b));
            let own = tape.matmul_rows(edges, w, 0, l)?;
            let from = tape.matmul_rows(nodes, w, l, 2 * l)?;
            let to = tape.matmul_rows(nodes, w, 2 * l, 3 * l)?;
            let from = tape.gather(from, &g.senders)?;
            let to = tape.gather(to, &g.receivers)?;
            let pre = tape.add(own, from)?;
            let pre = tape.add(pre, to)?;
            let pre = tape.add_bias(pre, b)?;
            let new_edges = block.edge.forward_from_first(tape, pre)?;
            let agg = tape.scatter_add(new_edges, &g.receivers, n)?;
            let node_in = tape.concat(&[nodes, agg])?;
            let new_nodes = block.node.forward(tape, node_in)?;
            nodes = tape.add(nodes, new_nodes)?;
            edges = tape.add(edges, new_edges)?;
        }
        Ok(Latent { nodes, edges })
    }

    /// Per-node normalized accelerations.
    pub fn decode(&self, tape: &mut Tape<'_, T>, latent: Latent) -> Result<Var> {
        self.decoder.forward(tape, latent.nodes)
    }

    /// Records the full forward pass and returns the acceleration variable.
    pub fn forward(&self, tape: &mut Tape<'_, T>, g: &GraphSample<T>) -> Result<Var> {
        let latent = self.encode(tape, g)?;
        let latent = self.process(tape, g, latent)?;
        self.decode(tape, latent)
    }

    /// Normalized accelerations for one graph.
    pub fn predict(&self, g: &GraphSample<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new(&self.params);
        let out = self.forward(&mut tape, g)?;
        Ok(tape.value(out).clone())
    }

    /// Per-node loss weights: one over the number of contributing particles.
    pub fn loss_weights(&self, g: &GraphSample<T>) -> Vec<T> {
        let counted: Vec<bool> = g
            .material
            .iter()
            .map(|m| self.config.loss == LossVariant::GranularRigid || !m.is_rigid())
            .collect();
        let k = counted.iter().filter(|&&c| c).count().max(1);
        let w = T::one() / T::lit(k as f64);
        counted.iter().map(|&c| if c { w } else { T::zero() }).collect()
    }

    /// Records the masked L1 loss of a graph with targets.
    pub fn loss(&self, tape: &mut Tape<'_, T>, g: &GraphSample<T>) -> Result<Var> {
        let target = g
            .target_accel
            .as_ref()
            .ok_or_else(|| Error::Contract("graph has no target accelerations".into()))?;
        let pred = self.forward(tape, g)?;
        tape.masked_l1(pred, target, &self.loss_weights(g))
    }

    /// Loss value and parameter gradients for one (batched) graph.
    pub fn loss_and_grad(&self, g: &GraphSample<T>) -> Result<(T, Gradients<T>)> {
        let mut tape = Tape::new(&self.params);
        let loss = self.loss(&mut tape, g)?;
        let value = tape.value(loss).data()[0];
        Ok((value, tape.backward(loss)?))
    }

    /// Loss value without gradients.
    pub fn loss_value(&self, g: &GraphSample<T>) -> Result<T> {
        let mut tape = Tape::new(&self.params);
        let loss = self.loss(&mut tape, g)?;
        Ok(tape.value(loss).data()[0])
    }

    /// Converts normalized accelerations to velocity change per frame.
    pub fn denormalize(&self, accel: &Tensor<T>) -> Vec<f64> {
        let d = self.config.dim;
        accel
            .data()
            .iter()
            .enumerate()
            .map(|(k, &a)| a.as_f64() * self.norm.acc_std[k % d] + self.norm.acc_mean[k % d])
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.params.numel()
    }

    /// Same model in another precision.
    pub fn cast<U: Real>(&self) -> GnsModel<U> {
        GnsModel {
            config: self.config.clone(),
            norm: self.norm.clone(),
            params: self.params.cast(),
            node_encoder: self.node_encoder.clone(),
            edge_encoder: self.edge_encoder.clone(),
            processor: self.processor.clone(),
            decoder: self.decoder.clone(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let meta = serde_json::to_value(CheckpointMeta {
            config: self.config.clone(),
            norm: self.norm.clone(),
        })?;
        write_checkpoint(dir, &self.params, meta)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (loaded, meta) = read_checkpoint::<T>(dir)?;
        let meta: CheckpointMeta = serde_json::from_value(meta)?;
        let mut model = GnsModel::new(meta.config, meta.norm, 0)?;
        if loaded.len() != model.params.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} tensors, architecture needs {}",
                loaded.len(),
                model.params.len()
            )));
        }
        for ((_, name, src), dst) in loaded.iter().zip(model.params.tensors_mut()) {
            if src.shape() != dst.shape() {
                return Err(Error::Format(format!("tensor {name} has shape {:?}", src.shape())));
            }
            *dst = src.clone();
        }
        for (k, (_, name, _)) in loaded.iter().enumerate() {
            if model.params.name(crate::nn::ParamId(k)) != name {
                return Err(Error::Format(format!("unexpected tensor {name}")));
            }
        }
        Ok(model)
    }
}

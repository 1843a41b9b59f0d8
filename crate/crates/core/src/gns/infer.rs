//! Tape-free forward pass with reusable buffers, used for rollouts.

use super::model::GnsModel;
use crate::error::Result;
use crate::graph::GraphSample;
use crate::nn::{Dense, Mlp, ParamSet, Tensor, LAYER_NORM_EPS};
use crate::scalar::Real;

/// Buffers reused across forward passes.
#[derive(Debug, Default)]
pub struct Workspace<T> {
    nodes: Vec<T>,
    edges: Vec<T>,
    a: Vec<T>,
    b: Vec<T>,
    from: Vec<T>,
    to: Vec<T>,
    agg: Vec<T>,
}

impl<T: Real> Workspace<T> {
    pub fn new() -> Self {
        Workspace {
            nodes: Vec::new(),
            edges: Vec::new(),
            a: Vec::new(),
            b: Vec::new(),
            from: Vec::new(),
            to: Vec::new(),
            agg: Vec::new(),
        }
    }
}

/// `out = x · w[band] (+ out)`, `x: rows × (end − start)`.
fn matmul_band<T: Real>(
    x: &[T],
    rows: usize,
    w: &Tensor<T>,
    start: usize,
    end: usize,
    out: &mut Vec<T>,
    accumulate: bool,
) {
    let n = w.cols();
    if !accumulate {
        out.clear();
        out.resize(rows * n, T::zero());
    }
    T::gemm(
        rows,
        end - start,
        n,
        x,
        false,
        &w.data()[start * n..end * n],
        false,
        out,
        accumulate,
    );
}

fn add_bias<T: Real>(out: &mut [T], b: &[T]) {
    for row in out.chunks_exact_mut(b.len()) {
        for (o, &v) in row.iter_mut().zip(b) {
            *o += v;
        }
    }
}

fn relu<T: Real>(x: &mut [T]) {
    for v in x {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
}

fn layer_norm<T: Real>(x: &mut [T], gain: &[T], bias: &[T]) {
    let c = gain.len();
    let inv_c = T::one() / T::lit(c as f64);
    let eps = T::lit(LAYER_NORM_EPS);
    for row in x.chunks_exact_mut(c) {
        let mean = row.iter().copied().sum::<T>() * inv_c;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_c;
        let s = T::one() / (var + eps).sqrt();
        for ((v, &g), &b) in row.iter_mut().zip(gain).zip(bias) {
            *v = (*v - mean) * s * g + b;
        }
    }
}

/// Remaining layers of `mlp` given the first pre-activation in `buf`;
/// the result ends up in `buf`.
fn finish_mlp<T: Real>(params: &ParamSet<T>, mlp: &Mlp, rows: usize, buf: &mut Vec<T>, tmp: &mut Vec<T>) {
    for &Dense { w, b } in &mlp.layers[1..] {
        relu(buf);
        let wt = params.get(w);
        matmul_band(buf, rows, wt, 0, wt.rows(), tmp, false);
        add_bias(tmp, params.get(b).data());
        std::mem::swap(buf, tmp);
    }
    if let Some((g, b)) = mlp.norm {
        layer_norm(buf, params.get(g).data(), params.get(b).data());
    }
}

fn run_mlp<T: Real>(params: &ParamSet<T>, mlp: &Mlp, x: &[T], rows: usize, buf: &mut Vec<T>, tmp: &mut Vec<T>) {
    let first = mlp.layers[0];
    let w = params.get(first.w);
    matmul_band(x, rows, w, 0, w.rows(), buf, false);
    add_bias(buf, params.get(first.b).data());
    finish_mlp(params, mlp, rows, buf, tmp);
}

impl<T: Real> GnsModel<T> {
    /// Normalized accelerations, numerically the same computation as the
    /// recorded forward pass.
    pub fn predict_with(&self, g: &GraphSample<T>, ws: &mut Workspace<T>) -> Result<Tensor<T>> {
        self.check_widths(g)?;
        let p = &self.params;
        let n = g.num_nodes();
        let m = g.num_edges();
        let l = self.config.latent_width;
        let Workspace {
            nodes,
            edges,
            a,
            b,
            from,
            to,
            agg,
        } = ws;

        run_mlp(p, &self.node_encoder, g.nodes.data(), n, a, b);
        std::mem::swap(nodes, a);
        run_mlp(p, &self.edge_encoder, g.edges.data(), m, a, b);
        std::mem::swap(edges, a);

        for block in &self.processor {
            let first = block.edge.layers[0];
            let w = p.get(first.w);
            matmul_band(edges, m, w, 0, l, a, false);
            matmul_band(nodes, n, w, l, 2 * l, from, false);
            matmul_band(nodes, n, w, 2 * l, 3 * l, to, false);
            let h = w.cols();
            for (e, row) in a.chunks_exact_mut(h).enumerate() {
                let (s, r) = (g.senders[e], g.receivers[e]);
                let fs = &from[s * h..(s + 1) * h];
                let tr = &to[r * h..(r + 1) * h];
                for ((o, &x), &y) in row.iter_mut().zip(fs).zip(tr) {
                    *o += x;
                    *o += y;
                }
            }
            add_bias(a, p.get(first.b).data());
            finish_mlp(p, &block.edge, m, a, b);

            agg.clear();
            agg.resize(n * l, T::zero());
            for (e, row) in a.chunks_exact(l).enumerate() {
                let r = g.receivers[e];
                for (o, &v) in agg[r * l..(r + 1) * l].iter_mut().zip(row) {
                    *o += v;
                }
            }
            for (x, &v) in edges.iter_mut().zip(a.iter()) {
                *x += v;
            }

            let first = block.node.layers[0];
            let w = p.get(first.w);
            matmul_band(nodes, n, w, 0, l, from, false);
            matmul_band(agg, n, w, l, 2 * l, from, true);
            add_bias(from, p.get(first.b).data());
            finish_mlp(p, &block.node, n, from, b);
            for (x, &v) in nodes.iter_mut().zip(from.iter()) {
                *x += v;
            }
        }

        run_mlp(p, &self.decoder, nodes, n, a, b);
        Tensor::from_vec(&[n, self.config.dim], a.clone())
    }
}

//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation eagerly (values are computed on the
//! spot) together with what its backward pass needs. Parameters live outside
//! the tape in a [`ParamSet`] and are referenced, not copied.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Epsilon inside the layer-norm square root.
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count over all tensors.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<T>)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| t.cast()).collect(),
        }
    }
}

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a particular tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

enum Op<T> {
    Param(usize),
    Input,
    Linear {
        x: usize,
        w: usize,
        b: Option<usize>,
    },
    MatMulRows {
        x: usize,
        w: usize,
        start: usize,
        end: usize,
    },
    Add(usize, usize),
    AddBias {
        x: usize,
        b: usize,
    },
    Mul(usize, usize),
    Scale(usize, T),
    Relu(usize),
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    Gather {
        x: usize,
        idx: Arc<[usize]>,
    },
    ScatterAdd {
        x: usize,
        idx: Arc<[usize]>,
    },
    Concat(Vec<usize>),
    MaskedL1 {
        pred: usize,
        target: Vec<T>,
        weight: Vec<T>,
    },
    Sum(usize),
}

struct Node<T> {
    value: Option<Tensor<T>>,
    op: Op<T>,
}

/// A recording of one forward computation.
pub struct Tape<'p, T: Real> {
    id: u64,
    params: &'p ParamSet<T>,
    nodes: Vec<Node<T>>,
}

fn shape_err(what: &str, a: &[usize], b: &[usize]) -> Error {
    Error::Shape(format!("{what}: {a:?} vs {b:?}"))
}

impl<'p, T: Real> Tape<'p, T> {
    pub fn new(params: &'p ParamSet<T>) -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            params,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Option<Tensor<T>>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    fn idx(&self, v: Var) -> usize {
        assert_eq!(v.tape, self.id, "variable belongs to another tape");
        v.idx
    }

    fn val(&self, i: usize) -> &Tensor<T> {
        match &self.nodes[i].op {
            Op::Param(p) => &self.params.tensors[*p],
            _ => self.nodes[i].value.as_ref().expect("recorded value"),
        }
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        self.val(self.idx(v))
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(None, Op::Param(id.0))
    }

    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(Some(value), Op::Input)
    }

    /// `x · w (+ b)` with `x: m × k`, `w: k × n`, `b: n`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xi, wi) = (self.idx(x), self.idx(w));
        let bi = b.map(|b| self.idx(b));
        let (xv, wv) = (self.val(xi), self.val(wi));
        let (m, k, n) = (xv.rows(), xv.cols(), wv.cols());
        if wv.rows() != k {
            return Err(shape_err("linear", xv.shape(), wv.shape()));
        }
        let mut out = Tensor::zeros(&[m, n]);
        T::gemm(m, k, n, xv.data(), false, wv.data(), false, out.data_mut(), false);
        if let Some(bi) = bi {
            let bv = self.val(bi);
            if bv.len() != n {
                return Err(shape_err("linear bias", bv.shape(), &[n]));
            }
            add_row_vector(&mut out, bv.data());
        }
        Ok(self.push(Some(out), Op::Linear { x: xi, w: wi, b: bi }))
    }

    /// `x · w[start..end, :]`, i.e. a product with a horizontal band of `w`.
    pub fn matmul_rows(&mut self, x: Var, w: Var, start: usize, end: usize) -> Result<Var> {
        let (xi, wi) = (self.idx(x), self.idx(w));
        let (xv, wv) = (self.val(xi), self.val(wi));
        let n = wv.cols();
        if end > wv.rows() || start > end || xv.cols() != end - start {
            return Err(shape_err("matmul_rows", xv.shape(), wv.shape()));
        }
        let m = xv.rows();
        let mut out = Tensor::zeros(&[m, n]);
        T::gemm(
            m,
            end - start,
            n,
            xv.data(),
            false,
            &wv.data()[start * n..end * n],
            false,
            out.data_mut(),
            false,
        );
        Ok(self.push(
            Some(out),
            Op::MatMulRows {
                x: xi,
                w: wi,
                start,
                end,
            },
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a), self.idx(b));
        let (av, bv) = (self.val(ai), self.val(bi));
        if av.len() != bv.len() || av.cols() != bv.cols() {
            return Err(shape_err("add", av.shape(), bv.shape()));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        Ok(self.push(Some(out), Op::Add(ai, bi)))
    }

    /// Adds a length-`n` vector to every row of an `m × n` matrix.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xi, bi) = (self.idx(x), self.idx(b));
        let (xv, bv) = (self.val(xi), self.val(bi));
        if bv.len() != xv.cols() {
            return Err(shape_err("add_bias", xv.shape(), bv.shape()));
        }
        let mut out = xv.clone();
        add_row_vector(&mut out, bv.data());
        Ok(self.push(Some(out), Op::AddBias { x: xi, b: bi }))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a), self.idx(b));
        let (av, bv) = (self.val(ai), self.val(bi));
        if av.len() != bv.len() {
            return Err(shape_err("mul", av.shape(), bv.shape()));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| x * y).collect();
        let out = Tensor::from_vec(av.shape(), data)?;
        Ok(self.push(Some(out), Op::Mul(ai, bi)))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let xi = self.idx(x);
        let out = self.val(xi).map(|v| v * c);
        self.push(Some(out), Op::Scale(xi, c))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let xi = self.idx(x);
        let out = self.val(xi).map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(Some(out), Op::Relu(xi))
    }

    /// Per-row standardization over the last dimension followed by an affine map.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (xi, gi, bi) = (self.idx(x), self.idx(gain), self.idx(bias));
        let (xv, gv, bv) = (self.val(xi), self.val(gi), self.val(bi));
        let c = xv.cols();
        if c < 2 || gv.len() != c || bv.len() != c {
            return Err(shape_err("layer_norm", xv.shape(), gv.shape()));
        }
        let rows = xv.rows();
        let eps = T::lit(LAYER_NORM_EPS);
        let inv_c = T::one() / T::from_usize(c).unwrap();
        let mut xhat = vec![T::zero(); rows * c];
        let mut rstd = vec![T::zero(); rows];
        let mut out = Tensor::zeros(xv.shape());
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().copied().sum::<T>() * inv_c;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_c;
            let s = T::one() / (var + eps).sqrt();
            rstd[r] = s;
            let xh = &mut xhat[r * c..(r + 1) * c];
            let o = out.row_mut(r);
            for j in 0..c {
                xh[j] = (row[j] - mean) * s;
                o[j] = xh[j] * gv.data()[j] + bv.data()[j];
            }
        }
        Ok(self.push(
            Some(out),
            Op::LayerNorm {
                x: xi,
                gain: gi,
                bias: bi,
                xhat,
                rstd,
            },
        ))
    }

    /// Row gather: `out[i] = x[idx[i]]`.
    pub fn gather(&mut self, x: Var, idx: &Arc<[usize]>) -> Result<Var> {
        let xi = self.idx(x);
        let xv = self.val(xi);
        if let Some(&bad) = idx.iter().find(|&&i| i >= xv.rows()) {
            return Err(Error::Shape(format!("gather index {bad} out of {}", xv.rows())));
        }
        let out = xv.select_rows(idx);
        Ok(self.push(
            Some(out),
            Op::Gather {
                x: xi,
                idx: idx.clone(),
            },
        ))
    }

    /// Row scatter-sum into `n` rows: `out[idx[i]] += x[i]`.
    pub fn scatter_add(&mut self, x: Var, idx: &Arc<[usize]>, n: usize) -> Result<Var> {
        let xi = self.idx(x);
        let xv = self.val(xi);
        if idx.len() != xv.rows() {
            return Err(Error::Shape(format!(
                "scatter_add: {} indices for {} rows",
                idx.len(),
                xv.rows()
            )));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Shape(format!("scatter index {bad} out of {n}")));
        }
        let c = xv.cols();
        let mut out = Tensor::zeros(&[n, c]);
        for (r, &dst) in idx.iter().enumerate() {
            let src = xv.row(r);
            for (o, &s) in out.row_mut(dst).iter_mut().zip(src) {
                *o += s;
            }
        }
        Ok(self.push(
            Some(out),
            Op::ScatterAdd {
                x: xi,
                idx: idx.clone(),
            },
        ))
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let ids: Vec<usize> = parts.iter().map(|&p| self.idx(p)).collect();
        let rows = ids.first().map_or(0, |&i| self.val(i).rows());
        let mut cols = 0;
        for &i in &ids {
            if self.val(i).rows() != rows {
                return Err(Error::Shape("concat row mismatch".into()));
            }
            cols += self.val(i).cols();
        }
        let mut out = Tensor::zeros(&[rows, cols]);
        let mut off = 0;
        for &i in &ids {
            let v = self.val(i);
            let w = v.cols();
            for r in 0..rows {
                out.row_mut(r)[off..off + w].copy_from_slice(v.row(r));
            }
            off += w;
        }
        Ok(self.push(Some(out), Op::Concat(ids)))
    }

    /// `Σ_i weight_i Σ_j |pred_ij − target_ij|`, a scalar.
    pub fn masked_l1(&mut self, pred: Var, target: &Tensor<T>, weight: &[T]) -> Result<Var> {
        let pi = self.idx(pred);
        let pv = self.val(pi);
        if pv.shape() != target.shape() || weight.len() != pv.rows() {
            return Err(shape_err("masked_l1", pv.shape(), target.shape()));
        }
        let c = pv.cols();
        let mut total = T::zero();
        for (r, &w) in weight.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            let s: T = pv.row(r).iter().zip(target.row(r)).map(|(&p, &t)| (p - t).abs()).sum();
            total += w * s;
        }
        debug_assert_eq!(target.len(), pv.rows() * c);
        Ok(self.push(
            Some(Tensor::scalar(total)),
            Op::MaskedL1 {
                pred: pi,
                target: target.data().to_vec(),
                weight: weight.to_vec(),
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let xi = self.idx(x);
        let s = self.val(xi).sum();
        self.push(Some(Tensor::scalar(s)), Op::Sum(xi))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if loss.tape != self.id || loss.idx >= self.nodes.len() {
            return Err(Error::NotRecorded);
        }
        if self.val(loss.idx).len() != 1 {
            return Err(Error::Contract("backward needs a scalar loss".into()));
        }
        let mut acc = Accum {
            nodes: (0..self.nodes.len()).map(|_| None).collect(),
            params: (0..self.params.len()).map(|_| None).collect(),
        };
        acc.nodes[loss.idx] = Some(Tensor::full(self.val(loss.idx).shape(), T::one()));

        for i in (0..=loss.idx).rev() {
            let Some(g) = acc.nodes[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Param(_) => unreachable!("parameter gradients accumulate directly"),
                Op::Input => {
                    acc.nodes[i] = Some(g);
                }
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (self.val(*x), self.val(*w));
                    let (m, k, n) = (xv.rows(), xv.cols(), wv.cols());
                    let dx = acc.buf(self, *x);
                    T::gemm(m, n, k, g.data(), false, wv.data(), true, dx.data_mut(), true);
                    let dw = acc.buf(self, *w);
                    T::gemm(k, m, n, xv.data(), true, g.data(), false, dw.data_mut(), true);
                    if let Some(b) = b {
                        col_sum_into(&g, acc.buf(self, *b).data_mut());
                    }
                }
                Op::MatMulRows { x, w, start, end } => {
                    let (xv, wv) = (self.val(*x), self.val(*w));
                    let (m, r, n) = (xv.rows(), end - start, wv.cols());
                    let band = &wv.data()[start * n..end * n];
                    let dx = acc.buf(self, *x);
                    T::gemm(m, n, r, g.data(), false, band, true, dx.data_mut(), true);
                    let dw = acc.buf(self, *w);
                    T::gemm(
                        r,
                        m,
                        n,
                        xv.data(),
                        true,
                        g.data(),
                        false,
                        &mut dw.data_mut()[start * n..end * n],
                        true,
                    );
                }
                Op::Add(a, b) => {
                    acc.buf(self, *a).add_assign(&g);
                    acc.buf(self, *b).add_assign(&g);
                }
                Op::AddBias { x, b } => {
                    acc.buf(self, *x).add_assign(&g);
                    col_sum_into(&g, acc.buf(self, *b).data_mut());
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.val(*a), self.val(*b));
                    let da = acc.buf(self, *a);
                    for ((d, &gg), &y) in da.data_mut().iter_mut().zip(g.data()).zip(bv.data()) {
                        *d += gg * y;
                    }
                    let db = acc.buf(self, *b);
                    for ((d, &gg), &x) in db.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                        *d += gg * x;
                    }
                }
                Op::Scale(x, c) => {
                    let dx = acc.buf(self, *x);
                    for (d, &gg) in dx.data_mut().iter_mut().zip(g.data()) {
                        *d += gg * *c;
                    }
                }
                Op::Relu(x) => {
                    let out = self.val(i);
                    let dx = acc.buf(self, *x);
                    for ((d, &gg), &o) in dx.data_mut().iter_mut().zip(g.data()).zip(out.data()) {
                        if o > T::zero() {
                            *d += gg;
                        }
                    }
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    rstd,
                } => {
                    let c = g.cols();
                    let rows = g.rows();
                    let gv = self.val(*gain).data().to_vec();
                    let inv_c = T::one() / T::from_usize(c).unwrap();
                    {
                        let dg = acc.buf(self, *gain);
                        for r in 0..rows {
                            for j in 0..c {
                                dg.data_mut()[j] += g.data()[r * c + j] * xhat[r * c + j];
                            }
                        }
                    }
                    col_sum_into(&g, acc.buf(self, *bias).data_mut());
                    let dx = acc.buf(self, *x);
                    let mut dxh = vec![T::zero(); c];
                    for r in 0..rows {
                        let gr = g.row(r);
                        let xh = &xhat[r * c..(r + 1) * c];
                        let mut m1 = T::zero();
                        let mut m2 = T::zero();
                        for j in 0..c {
                            dxh[j] = gr[j] * gv[j];
                            m1 += dxh[j];
                            m2 += dxh[j] * xh[j];
                        }
                        m1 *= inv_c;
                        m2 *= inv_c;
                        let out = dx.row_mut(r);
                        for j in 0..c {
                            out[j] += rstd[r] * (dxh[j] - m1 - xh[j] * m2);
                        }
                    }
                }
                Op::Gather { x, idx } => {
                    let dx = acc.buf(self, *x);
                    for (r, &src) in idx.iter().enumerate() {
                        for (d, &gg) in dx.row_mut(src).iter_mut().zip(g.row(r)) {
                            *d += gg;
                        }
                    }
                }
                Op::ScatterAdd { x, idx } => {
                    let dx = acc.buf(self, *x);
                    for (r, &dst) in idx.iter().enumerate() {
                        for (d, &gg) in dx.row_mut(r).iter_mut().zip(g.row(dst)) {
                            *d += gg;
                        }
                    }
                }
                Op::Concat(ids) => {
                    let rows = g.rows();
                    let mut off = 0;
                    for &p in ids {
                        let w = self.val(p).cols();
                        let dp = acc.buf(self, p);
                        for r in 0..rows {
                            for (d, &gg) in dp.row_mut(r).iter_mut().zip(&g.row(r)[off..off + w]) {
                                *d += gg;
                            }
                        }
                        off += w;
                    }
                }
                Op::MaskedL1 { pred, target, weight } => {
                    let s = g.data()[0];
                    let pv = self.val(*pred);
                    let c = pv.cols();
                    let dp = acc.buf(self, *pred);
                    for (r, &w) in weight.iter().enumerate() {
                        if w == T::zero() {
                            continue;
                        }
                        for j in 0..c {
                            let diff = pv.data()[r * c + j] - target[r * c + j];
                            let sign = if diff > T::zero() {
                                T::one()
                            } else if diff < T::zero() {
                                -T::one()
                            } else {
                                T::zero()
                            };
                            dp.data_mut()[r * c + j] += s * w * sign;
                        }
                    }
                }
                Op::Sum(x) => {
                    let s = g.data()[0];
                    let dx = acc.buf(self, *x);
                    dx.data_mut().iter_mut().for_each(|d| *d += s);
                }
            }
        }

        let params = acc
            .params
            .into_iter()
            .zip(&self.params.tensors)
            .map(|(g, p)| g.unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect();
        Ok(Gradients {
            tape: self.id,
            params,
            inputs: acc.nodes,
        })
    }
}

struct Accum<T> {
    nodes: Vec<Option<Tensor<T>>>,
    params: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Accum<T> {
    fn buf(&mut self, tape: &Tape<'_, T>, i: usize) -> &mut Tensor<T> {
        match &tape.nodes[i].op {
            Op::Param(p) => self.params[*p].get_or_insert_with(|| Tensor::zeros(tape.params.tensors[*p].shape())),
            _ => self.nodes[i].get_or_insert_with(|| Tensor::zeros(tape.val(i).shape())),
        }
    }
}

fn add_row_vector<T: Real>(out: &mut Tensor<T>, b: &[T]) {
    let c = out.cols();
    for row in out.data_mut().chunks_exact_mut(c) {
        for (o, &v) in row.iter_mut().zip(b) {
            *o += v;
        }
    }
}

fn col_sum_into<T: Real>(g: &Tensor<T>, out: &mut [T]) {
    let c = g.cols();
    if c == 0 {
        return;
    }
    for row in g.data().chunks_exact(c) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

/// Result of a reverse sweep.
pub struct Gradients<T> {
    tape: u64,
    params: Vec<Tensor<T>>,
    inputs: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient for a parameter; zeros when the loss does not depend on it.
    pub fn param(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0]
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn into_params(self) -> Vec<Tensor<T>> {
        self.params
    }

    /// Gradient with respect to a tape input.
    pub fn wrt(&self, v: Var) -> Result<&Tensor<T>> {
        if v.tape != self.tape || v.idx >= self.inputs.len() {
            return Err(Error::NotRecorded);
        }
        self.inputs[v.idx].as_ref().ok_or(Error::NotRecorded)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_sum_gradient_is_outer_product() {
        let mut ps = ParamSet::<f64>::new();
        let w = ps.add("w", Tensor::from_rows(&[&[0.5, -1.0], &[2.0, 0.25], &[1.0, 1.0]]));
        let mut tape = Tape::new(&ps);
        let x = tape.input(Tensor::from_rows(&[&[1.0, 2.0, 3.0]]));
        let wv = tape.param(w);
        let y = tape.linear(x, wv, None).unwrap();
        let loss = tape.sum(y);
        let g = tape.backward(loss).unwrap();
        // d/dW sum(x W) = x^T 1
        assert_eq!(g.param(w).data(), &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn relu_blocks_negative_preactivation() {
        let ps = ParamSet::<f64>::new();
        let mut tape = Tape::new(&ps);
        let x = tape.input(Tensor::from_rows(&[&[-0.5, 0.7]]));
        let y = tape.relu(x);
        let loss = tape.sum(y);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn foreign_variable_is_rejected() {
        let ps = ParamSet::<f64>::new();
        let mut a = Tape::new(&ps);
        let mut b = Tape::new(&ps);
        let xa = a.input(Tensor::scalar(1.0));
        let la = a.sum(xa);
        let xb = b.input(Tensor::scalar(2.0));
        let lb = b.sum(xb);
        let ga = a.backward(la).unwrap();
        assert!(matches!(ga.wrt(xb), Err(Error::NotRecorded)));
        assert!(matches!(a.backward(lb), Err(Error::NotRecorded)));
    }

    #[test]
    fn layer_norm_two_point_row() {
        let mut ps = ParamSet::<f64>::new();
        let gain = ps.add("g", Tensor::full(&[2], 1.0));
        let bias = ps.add("b", Tensor::zeros(&[2]));
        let mut tape = Tape::new(&ps);
        let x = tape.input(Tensor::from_rows(&[&[1.0, 3.0]]));
        let (g, b) = (tape.param(gain), tape.param(bias));
        let y = tape.layer_norm(x, g, b).unwrap();
        // mean 2, variance 1: (x - 2)/sqrt(1 + eps)
        let s = 1.0 / (1.0 + LAYER_NORM_EPS).sqrt();
        let out = tape.value(y).data();
        assert!((out[0] + s).abs() < 1e-15 && (out[1] - s).abs() < 1e-15);
    }

    #[test]
    fn scatter_gather_are_adjoint() {
        let ps = ParamSet::<f64>::new();
        let mut tape = Tape::new(&ps);
        let idx: Arc<[usize]> = vec![2, 0, 2].into();
        let x = tape.input(Tensor::from_rows(&[&[1.0], &[2.0], &[3.0]]));
        let s = tape.scatter_add(x, &idx, 4).unwrap();
        assert_eq!(tape.value(s).data(), &[2.0, 0.0, 4.0, 0.0]);
        let gth = tape.gather(s, &idx).unwrap();
        assert_eq!(tape.value(gth).data(), &[4.0, 2.0, 4.0]);
        let loss = tape.sum(gth);
        let g = tape.backward(loss).unwrap();
        // each input row reaches output through its scatter slot, which is
        // gathered as many times as its index appears
        assert_eq!(g.wrt(x).unwrap().data(), &[2.0, 1.0, 2.0]);
    }
}

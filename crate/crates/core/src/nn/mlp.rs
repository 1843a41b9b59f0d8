use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{ParamId, ParamSet, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One dense layer: `y = x · w + b` with `w: fan_in × fan_out`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
}

/// Parameter handles of a multi-layer perceptron with ReLU between layers and
/// an optional trailing layer norm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mlp {
    pub widths: Vec<usize>,
    pub layers: Vec<Dense>,
    pub norm: Option<(ParamId, ParamId)>,
}

impl Serialize for ParamId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u64(self.0 as u64)
    }
}

impl<'de> Deserialize<'de> for ParamId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(ParamId(u64::deserialize(d)? as usize))
    }
}

impl Mlp {
    /// Registers a fresh MLP with widths `[in, hidden.., out]`.
    ///
    /// Weights are uniform in `±sqrt(6 / fan_in)`, biases zero, layer-norm
    /// gain one and bias zero.
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        widths: &[usize],
        layer_norm: bool,
        rng: &mut R,
    ) -> Mlp {
        assert!(widths.len() >= 2, "an MLP needs at least input and output widths");
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (l, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / fan_in.max(1) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| T::lit(rng.random_range(-bound..bound)))
                .collect();
            let w = params.add(
                format!("{name}.l{l}.w"),
                Tensor::from_vec(&[fan_in, fan_out], data).expect("sized"),
            );
            let b = params.add(format!("{name}.l{l}.b"), Tensor::zeros(&[fan_out]));
            layers.push(Dense { w, b });
        }
        let norm = layer_norm.then(|| {
            let out = *widths.last().unwrap();
            let g = params.add(format!("{name}.ln.gain"), Tensor::full(&[out], T::one()));
            let b = params.add(format!("{name}.ln.bias"), Tensor::zeros(&[out]));
            (g, b)
        });
        Mlp {
            widths: widths.to_vec(),
            layers,
            norm,
        }
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let width = tape.value(x).cols();
        if width != self.input_width() {
            return Err(Error::Shape(format!(
                "MLP expects input width {}, got {width}",
                self.input_width()
            )));
        }
        let first = self.layers[0];
        let (w, b) = (tape.param(first.w), tape.param(first.b));
        let h = tape.linear(x, w, Some(b))?;
        self.forward_from_first(tape, h)
    }

    /// Continues the forward pass from the first layer's pre-activation.
    ///
    /// Used when the first layer is evaluated piecewise over a concatenated
    /// input (see the interaction network).
    pub fn forward_from_first<T: Real>(&self, tape: &mut Tape<'_, T>, pre: Var) -> Result<Var> {
        let mut h = pre;
        for layer in &self.layers[1..] {
            h = tape.relu(h);
            let (w, b) = (tape.param(layer.w), tape.param(layer.b));
            h = tape.linear(h, w, Some(b))?;
        }
        if let Some((g, b)) = self.norm {
            let (g, b) = (tape.param(g), tape.param(b));
            h = tape.layer_norm(h, g, b)?;
        }
        Ok(h)
    }
}

/// Evaluates an MLP on a batch of rows outside any training recording.
pub fn mlp_forward<T: Real>(params: &ParamSet<T>, mlp: &Mlp, x: &Tensor<T>) -> Result<Tensor<T>> {
    let mut tape = Tape::new(params);
    let xv = tape.input(x.clone());
    let y = mlp.forward(&mut tape, xv)?;
    Ok(tape.value(y).clone())
}

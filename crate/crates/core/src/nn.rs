//! Small fully connected networks with hand-written backpropagation.
//!
//! Every learner in the crate (reward ensemble, critics, actors, value
//! functions) is built from [`Mlp`]. Batches are row-major `[batch, features]`
//! matrices; weights are stored `[fan_in, fan_out]` so a layer is
//! `x.dot(W) + b`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    LeakyRelu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation `z`, given `y = apply(z)`.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    hidden: Activation,
    output: Activation,
}

/// Intermediate values kept from a forward pass for [`Mlp::backward`].
#[derive(Debug)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    out: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.out
    }
}

/// Gradients (or any other per-parameter quantity) shaped like an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            w.mapv_inplace(|v| v * factor);
            b.mapv_inplace(|v| v * factor);
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

impl Mlp {
    /// Build a network with fan-in scaled uniform initialisation,
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and biases.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weight = Array2::from_shape_fn((fan_in, fan_out), |_| {
                    rng.random_range(-bound..bound)
                });
                let bias = Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..bound));
                Dense { weight, bias }
            })
            .collect();
        Mlp {
            layers,
            hidden,
            output,
        }
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| Dense {
                weight: Array2::zeros((w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Mlp {
            layers,
            hidden,
            output,
        }
    }

    pub fn from_layers(layers: Vec<Dense>, hidden: Activation, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].weight.ncols() != pair[1].weight.nrows() {
                return Err(Error::DimMismatch {
                    expected: pair[0].weight.ncols(),
                    got: pair[1].weight.nrows(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.weight.ncols() {
                return Err(Error::DimMismatch {
                    expected: l.weight.ncols(),
                    got: l.bias.len(),
                });
            }
        }
        Ok(Mlp {
            layers,
            hidden,
            output,
        })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].weight.nrows()];
        s.extend(self.layers.iter().map(|l| l.weight.ncols()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.ncols()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    fn activation_for(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let act = self.activation_for(i);
            let mut z = h.dot(&layer.weight);
            z += &layer.bias;
            z.mapv_inplace(|v| act.apply(v));
            h = z;
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let act = self.activation_for(i);
            let mut z = h.dot(&layer.weight);
            z += &layer.bias;
            let y = z.mapv(|v| act.apply(v));
            inputs.push(h);
            pre.push(z);
            h = y;
        }
        Ok(ForwardCache {
            inputs,
            pre,
            out: h,
        })
    }

    /// Backpropagate `grad_out = dL/d(output)` through a cached forward pass.
    /// Returns parameter gradients and `dL/d(input)`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: ArrayView2<f64>) -> (Gradients, Array2<f64>) {
        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        let mut upstream = grad_out.to_owned();
        for i in (0..n).rev() {
            let act = self.activation_for(i);
            let z = &cache.pre[i];
            let y = if i + 1 == n {
                &cache.out
            } else {
                &cache.inputs[i + 1]
            };
            let mut dz = upstream;
            ndarray::Zip::from(&mut dz)
                .and(z)
                .and(y)
                .for_each(|g, &zv, &yv| *g *= act.derivative(zv, yv));
            let dw = cache.inputs[i].t().dot(&dz);
            let db = dz.sum_axis(Axis(0));
            upstream = dz.dot(&self.layers[i].weight.t());
            grads.push((dw, db));
        }
        grads.reverse();
        (Gradients { layers: grads }, upstream)
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weight.iter_mut() {
                *w = it.next().unwrap();
            }
            for b in l.bias.iter_mut() {
                *b = it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Exponential moving average toward `source`: `self = (1-tau)*self + tau*source`.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) {
        for (dst, src) in self.layers.iter_mut().zip(&source.layers) {
            ndarray::Zip::from(&mut dst.weight)
                .and(&src.weight)
                .for_each(|d, &s| *d = (1.0 - tau) * *d + tau * s);
            ndarray::Zip::from(&mut dst.bias)
                .and(&src.bias)
                .for_each(|d, &s| *d = (1.0 - tau) * *d + tau * s);
        }
    }

    pub fn to_checkpoint(&self) -> MlpCheckpoint {
        MlpCheckpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            sizes: self.sizes(),
            hidden_activation: self.hidden,
            output_activation: self.output,
            params: self.params_flat(),
        }
    }

    pub fn from_checkpoint(ck: &MlpCheckpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint format `{}`",
                ck.format
            )));
        }
        if ck.sizes.len() < 2 || ck.sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument("bad layer sizes in checkpoint".into()));
        }
        let mut net = Mlp::zeros(&ck.sizes, ck.hidden_activation, ck.output_activation);
        net.set_params_flat(&ck.params)?;
        Ok(net)
    }
}

pub const CHECKPOINT_FORMAT: &str = "prefrl-mlp/1";

/// Flat parameter dump: an architecture header followed by every layer's
/// weights (row-major `[fan_in, fan_out]`) and then its biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub format: String,
    pub sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub params: Vec<f64>,
}

/// Adaptive-moment gradient descent state for one network.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let lr = self.lr;
        let eps = self.eps;
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[i];
            let (mw, mb) = &mut self.m.layers[i];
            let (vw, vb) = &mut self.v.layers[i];
            ndarray::Zip::from(&mut layer.weight)
                .and(gw)
                .and(mw)
                .and(vw)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
            ndarray::Zip::from(&mut layer.bias)
                .and(gb)
                .and(mb)
                .and(vb)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }
}

/// Adam for a bare parameter vector (used for state-independent log-stds).
#[derive(Clone, Debug)]
pub struct VecAdam {
    pub lr: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl VecAdam {
    pub fn new(len: usize, lr: f64) -> Self {
        VecAdam {
            lr,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.step += 1;
        let c1 = 1.0 - B1.powi(self.step as i32);
        let c2 = 1.0 - B2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grads[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grads[i] * grads[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

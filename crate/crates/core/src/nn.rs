//! A fully connected network with hand-written reverse-mode gradients.
//!
//! Parameters live in one flat vector, layer by layer: the `out x in`
//! weight matrix in row-major order followed by the `out` bias entries. The
//! same layout is used by [`GradientBuffer`], the optimizers and the
//! checkpoint format.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    /// The ReLU derivative at 0 is taken to be 0.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

fn layer_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut at = 0;
    offsets.push(0);
    for w in sizes.windows(2) {
        at += w[0] * w[1] + w[1];
        offsets.push(at);
    }
    offsets
}

/// A multi-layer perceptron. The activation follows every layer but the last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

impl Mlp {
    /// Glorot-uniform weights in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let mut mlp = Mlp::zeros(sizes, activation)?;
        for l in 0..mlp.num_layers() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in mlp.weights_mut(l) {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(mlp)
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer sizes {sizes:?}")));
        }
        let total = *layer_offsets(sizes).last().unwrap();
        Ok(Mlp { sizes: sizes.to_vec(), activation, params: vec![0.0; total] })
    }

    pub fn from_params(sizes: &[usize], activation: Activation, params: Vec<f64>) -> Result<Self> {
        let mut mlp = Mlp::zeros(sizes, activation)?;
        if params.len() != mlp.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters supplied for layers {sizes:?} which need {}",
                params.len(),
                mlp.params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("mlp parameters"));
        }
        mlp.params = params;
        Ok(mlp)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn ranges(&self, layer: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let start = layer_offsets(&self.sizes[..=layer]).last().copied().unwrap();
        let nw = self.sizes[layer] * self.sizes[layer + 1];
        (start..start + nw, start + nw..start + nw + self.sizes[layer + 1])
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.params[self.ranges(layer).0]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let r = self.ranges(layer).0;
        &mut self.params[r]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.params[self.ranges(layer).1]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let r = self.ranges(layer).1;
        &mut self.params[r]
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(x, 1)?.into_output())
    }

    /// Evaluates `batch` row-major inputs, keeping every layer's output for
    /// a later [`Mlp::backward_batch`].
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Trace> {
        if inputs.len() != batch * self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "expected {batch} inputs of length {}, got {} values",
                self.input_dim(),
                inputs.len()
            )));
        }
        if inputs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("mlp input"));
        }
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(inputs.to_vec());
        let last = self.num_layers() - 1;
        let mut offset = 0;
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let x = acts.last().unwrap();
            let mut y = vec![0.0; batch * n_out];
            for (xr, yr) in x.chunks_exact(n_in).zip(y.chunks_exact_mut(n_out)) {
                for (o, (yo, wr)) in yr.iter_mut().zip(w.chunks_exact(n_in)).enumerate() {
                    let mut z = b[o];
                    for (wi, xi) in wr.iter().zip(xr) {
                        z += wi * xi;
                    }
                    *yo = if l == last { z } else { self.activation.apply(z) };
                }
            }
            acts.push(y);
        }
        Ok(Trace { batch, acts })
    }

    /// Accumulates parameter gradients for `upstream = dLoss/dOutput` into
    /// `grads` and returns `dLoss/dInput`, both batch-major.
    pub fn backward_batch(&self, trace: &Trace, upstream: &[f64], grads: &mut GradientBuffer) -> Result<Vec<f64>> {
        let batch = trace.batch;
        if upstream.len() != batch * self.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient has {} values, expected {batch} x {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        if grads.values.len() != self.params.len() || grads.sizes != self.sizes {
            return Err(Error::ShapeMismatch("gradient buffer does not match the network".into()));
        }
        let offsets = layer_offsets(&self.sizes);
        let mut delta = upstream.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let x = &trace.acts[l];
            let start = offsets[l];
            let w = &self.params[start..start + n_in * n_out];
            let (gw, gb) = grads.values[start..start + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let mut dx = vec![0.0; batch * n_in];
            for ((xr, dr), dxr) in x.chunks_exact(n_in).zip(delta.chunks_exact(n_out)).zip(dx.chunks_exact_mut(n_in)) {
                for (o, &d) in dr.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let wr = &w[o * n_in..(o + 1) * n_in];
                    let gwr = &mut gw[o * n_in..(o + 1) * n_in];
                    for i in 0..n_in {
                        gwr[i] += d * xr[i];
                        dxr[i] += d * wr[i];
                    }
                }
            }
            if l > 0 {
                for (g, &y) in dx.iter_mut().zip(x) {
                    *g *= self.activation.derivative_from_output(y);
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    /// Forward and backward in one call; returns the parameter gradients and
    /// `dLoss/dInput`.
    pub fn backward(&self, inputs: &[f64], batch: usize, upstream: &[f64]) -> Result<(GradientBuffer, Vec<f64>)> {
        let trace = self.forward_batch(inputs, batch)?;
        let mut grads = GradientBuffer::zeros_like(self);
        let dx = self.backward_batch(&trace, upstream, &mut grads)?;
        Ok((grads, dx))
    }
}

/// Layer outputs of a batched forward pass; `acts[0]` is the input.
#[derive(Clone, Debug)]
pub struct Trace {
    batch: usize,
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }

    pub fn into_output(mut self) -> Vec<f64> {
        self.acts.pop().unwrap()
    }
}

/// Accumulated `dLoss/dParams`, laid out exactly like [`Mlp::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBuffer {
    sizes: Vec<usize>,
    values: Vec<f64>,
}

impl GradientBuffer {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        GradientBuffer { sizes: mlp.sizes.clone(), values: vec![0.0; mlp.params.len()] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn ranges(&self, layer: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let start = layer_offsets(&self.sizes[..=layer]).last().copied().unwrap();
        let nw = self.sizes[layer] * self.sizes[layer + 1];
        (start..start + nw, start + nw..start + nw + self.sizes[layer + 1])
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.values[self.ranges(layer).0]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.values[self.ranges(layer).1]
    }

    pub fn add_assign(&mut self, other: &GradientBuffer) {
        assert_eq!(self.sizes, other.sizes, "gradient buffers of different shapes");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// First-order update rule over a flat parameter vector.
pub trait Optimizer {
    fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()>;
    fn learning_rate(&self) -> f64;
    fn set_learning_rate(&mut self, lr: f64);
}

fn check_step(params: &[f64], grads: &[f64]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::ShapeMismatch(format!("{} gradients for {} parameters", grads.len(), params.len())));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Sgd {
    pub lr: f64,
}

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_step(params, grads)?;
        for (p, g) in params.iter_mut().zip(grads) {
            *p -= self.lr * g;
        }
        Ok(())
    }

    fn learning_rate(&self) -> f64 {
        self.lr
    }

    fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: Vec::new(), v: Vec::new(), t: 0 }
    }
}

impl Optimizer for Adam {
    fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_step(params, grads)?;
        if self.m.len() != params.len() {
            self.m = vec![0.0; params.len()];
            self.v = vec![0.0; params.len()];
            self.t = 0;
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
        Ok(())
    }

    fn learning_rate(&self) -> f64 {
        self.lr
    }

    fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }
}

//! Dense feed-forward networks with exact backpropagation.
//!
//! Everything is `f64`. Batches are row-major `batch × width` slices.

mod adam;
mod check;
mod checkpoint;

pub use adam::Adam;
pub use check::{check_gradient, grad_check, grad_check_with, relative_error};
pub use checkpoint::{read_params, write_params};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("cache was produced by different or since-modified parameters")]
    StaleCache,
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation's output.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Linear => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }
}

/// Layer widths from input to output; one activation per hidden layer.
/// The output layer is always linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activations: Vec<Activation>,
}

impl NetSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self, NnError> {
        let hidden = layer_sizes.len().saturating_sub(2);
        let spec = NetSpec {
            layer_sizes,
            hidden_activations: vec![activation; hidden],
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 122 → 64 → 64 → `outputs`, ReLU.
    pub fn default_for(outputs: usize) -> Self {
        NetSpec::new(vec![crate::env::OBS_DIM, 64, 64, outputs], Activation::Relu).expect("valid default")
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.layer_sizes.len() < 3 {
            return Err(NnError::InvalidSpec("need at least one hidden layer".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(NnError::InvalidSpec("layer sizes must be at least 1".into()));
        }
        if self.hidden_activations.len() != self.layer_sizes.len() - 2 {
            return Err(NnError::InvalidSpec(format!(
                "{} hidden layers but {} activations",
                self.layer_sizes.len() - 2,
                self.hidden_activations.len()
            )));
        }
        Ok(())
    }

    pub fn input(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// `n_out × n_in`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize, activation: Activation) -> Self {
        Dense {
            n_in,
            n_out,
            w: vec![0.0; n_in * n_out],
            b: vec![0.0; n_out],
            activation,
        }
    }
}

static STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    STAMP.fetch_add(1, Ordering::Relaxed)
}

/// Network weights. Every mutation gets a new stamp so caches from earlier
/// forward passes are detected as stale.
#[derive(Debug, Clone)]
pub struct Params {
    layers: Vec<Dense>,
    stamp: u64,
}

impl PartialEq for Params {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Params {
    /// He-uniform weights, zero biases.
    pub fn init(spec: &NetSpec, seed: u64) -> Result<Self, NnError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = spec.layer_sizes.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let (n_in, n_out) = (spec.layer_sizes[k], spec.layer_sizes[k + 1]);
                let act = spec.hidden_activations.get(k).copied().unwrap_or(Activation::Linear);
                let limit = (6.0 / n_in as f64).sqrt();
                let mut layer = Dense::zeros(n_in, n_out, act);
                layer.w.iter_mut().for_each(|w| *w = rng.gen_range(-limit..limit));
                layer
            })
            .collect();
        Ok(Params {
            layers,
            stamp: fresh_stamp(),
        })
    }

    /// Multiplies the output layer's weights by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let last = self.layers.last_mut().unwrap();
        last.w.iter_mut().for_each(|w| *w *= factor);
        self.stamp = fresh_stamp();
    }

    /// Any chain of layers with matching widths, including a single layer.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::InvalidSpec("no layers".into()));
        }
        for l in &layers {
            if l.n_in == 0 || l.n_out == 0 || l.w.len() != l.n_in * l.n_out || l.b.len() != l.n_out {
                return Err(NnError::InvalidSpec("layer buffer sizes do not match widths".into()));
            }
        }
        for pair in layers.windows(2) {
            if pair[0].n_out != pair[1].n_in {
                return Err(NnError::InvalidSpec(format!(
                    "layer widths {} and {} do not chain",
                    pair[0].n_out, pair[1].n_in
                )));
            }
        }
        Ok(Params {
            layers,
            stamp: fresh_stamp(),
        })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output(&self) -> usize {
        self.layers.last().unwrap().n_out
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weights then biases, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        for l in &self.layers {
            v.extend_from_slice(&l.w);
            v.extend_from_slice(&l.b);
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.len() {
            return Err(NnError::Shape {
                expected: self.len(),
                got: flat.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let (nw, nb) = (l.w.len(), l.b.len());
            l.w.copy_from_slice(&flat[off..off + nw]);
            l.b.copy_from_slice(&flat[off + nw..off + nw + nb]);
            off += nw + nb;
        }
        self.stamp = fresh_stamp();
        Ok(())
    }

    /// Adds `delta` (flattened order) to every parameter.
    pub fn apply_update(&mut self, delta: &[f64]) -> Result<(), NnError> {
        if delta.len() != self.len() {
            return Err(NnError::Shape {
                expected: self.len(),
                got: delta.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            for x in l.w.iter_mut().chain(l.b.iter_mut()) {
                *x += delta[off];
                off += 1;
            }
        }
        self.stamp = fresh_stamp();
        Ok(())
    }

    /// Zero-valued gradient with this network's shapes.
    pub fn zero_grads(&self) -> Grads {
        Grads {
            layers: self
                .layers
                .iter()
                .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
                .collect(),
        }
    }
}

/// Gradient with the same shapes as [`Params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    /// (weights, biases) per layer.
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Grads {
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in &self.layers {
            v.extend_from_slice(w);
            v.extend_from_slice(b);
        }
        v
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.iter_mut().zip(ow).for_each(|(x, y)| *x += y);
            b.iter_mut().zip(ob).for_each(|(x, y)| *x += y);
        }
    }
}

/// Layer outputs from one forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    stamp: u64,
    batch: usize,
    /// `acts[0]` is the input; `acts[k + 1]` is layer k's output.
    acts: Vec<Vec<f64>>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Runs a batch of `x.len() / input` rows through the network.
pub fn forward_batch(params: &Params, x: &[f64]) -> Result<Cache, NnError> {
    let n_in = params.input();
    if x.is_empty() || !x.len().is_multiple_of(n_in) {
        return Err(NnError::Shape {
            expected: n_in,
            got: x.len(),
        });
    }
    let batch = x.len() / n_in;
    let mut acts = Vec::with_capacity(params.layers.len() + 1);
    acts.push(x.to_vec());
    for l in &params.layers {
        let input = acts.last().unwrap();
        let mut out = vec![0.0; batch * l.n_out];
        for r in 0..batch {
            let row = &input[r * l.n_in..(r + 1) * l.n_in];
            for o in 0..l.n_out {
                let w = &l.w[o * l.n_in..(o + 1) * l.n_in];
                let z: f64 = l.b[o] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                out[r * l.n_out + o] = l.activation.apply(z);
            }
        }
        acts.push(out);
    }
    Ok(Cache {
        stamp: params.stamp,
        batch,
        acts,
    })
}

/// Single-input forward pass.
pub fn forward(params: &Params, x: &[f64]) -> Result<(Vec<f64>, Cache), NnError> {
    if x.len() != params.input() {
        return Err(NnError::Shape {
            expected: params.input(),
            got: x.len(),
        });
    }
    let cache = forward_batch(params, x)?;
    Ok((cache.output().to_vec(), cache))
}

/// Gradient of a scalar loss given dL/d(output) for every row of the batch.
pub fn backward(params: &Params, cache: &Cache, loss_grad: &[f64]) -> Result<Grads, NnError> {
    if cache.stamp != params.stamp || cache.acts.len() != params.layers.len() + 1 {
        return Err(NnError::StaleCache);
    }
    let batch = cache.batch;
    if loss_grad.len() != batch * params.output() {
        return Err(NnError::Shape {
            expected: batch * params.output(),
            got: loss_grad.len(),
        });
    }
    let mut grads = params.zero_grads();
    let mut delta = loss_grad.to_vec();
    for (k, l) in params.layers.iter().enumerate().rev() {
        let out = &cache.acts[k + 1];
        let input = &cache.acts[k];
        for (d, &y) in delta.iter_mut().zip(out) {
            *d *= l.activation.slope(y);
        }
        let (gw, gb) = &mut grads.layers[k];
        for r in 0..batch {
            let row = &input[r * l.n_in..(r + 1) * l.n_in];
            for o in 0..l.n_out {
                let d = delta[r * l.n_out + o];
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, x) in gw[o * l.n_in..(o + 1) * l.n_in].iter_mut().zip(row) {
                    *g += d * x;
                }
            }
        }
        if k > 0 {
            let mut prev = vec![0.0; batch * l.n_in];
            for r in 0..batch {
                let p = &mut prev[r * l.n_in..(r + 1) * l.n_in];
                for o in 0..l.n_out {
                    let d = delta[r * l.n_out + o];
                    if d == 0.0 {
                        continue;
                    }
                    for (pi, w) in p.iter_mut().zip(&l.w[o * l.n_in..(o + 1) * l.n_in]) {
                        *pi += d * w;
                    }
                }
            }
            delta = prev;
        }
    }
    Ok(grads)
}

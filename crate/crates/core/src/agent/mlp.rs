//! Feedforward networks with hand-written backpropagation.
//!
//! Everything is 64-bit and allocation-light: weights are row-major flat
//! vectors, forward passes cache pre-activations, and gradients are plain
//! parameter-shaped buffers. Gradient correctness against central finite
//! differences is the module's foundational test.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Output nonlinearity. Hidden layers are always rectified-linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    /// Hyperbolic tangent, for actors emitting actions in (-1, 1).
    Tanh,
    /// Identity, for critics emitting unbounded values.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(input.len(), self.in_dim);
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b[o];
            for (wi, xi) in row.iter().zip(input) {
                acc = wi.mul_add(*xi, acc);
            }
            out.push(acc);
        }
    }
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrads {
            layers: mlp
                .layers
                .iter()
                .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
                .collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            for g in w.iter_mut() {
                *g *= s;
            }
            for g in b.iter_mut() {
                *g *= s;
            }
        }
    }
}

/// Cached intermediate values of one forward pass, reused by backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (so `layer_inputs[0]` is the network input).
    pub layer_inputs: Vec<Vec<f64>>,
    /// Pre-activation values of each layer.
    pub pre_activations: Vec<Vec<f64>>,
    /// Post-activation network output.
    pub output: Vec<f64>,
}

impl ForwardCache {
    /// Pre-activation of the output layer (the actor's pre-tanh action).
    pub fn pre_output(&self) -> &[f64] {
        self.pre_activations.last().expect("at least one layer")
    }
}

/// Multilayer perceptron: ReLU hidden layers, configurable output activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub output_activation: OutputActivation,
}

impl Mlp {
    /// Build from layer sizes `[in, h1, ..., out]`. Hidden weights are
    /// uniform in `±1/sqrt(fan_in)`, the output layer uniform in `±3e-3`
    /// (standard DDPG initialization), biases zero.
    pub fn new<R: Rng>(sizes: &[usize], output_activation: OutputActivation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(idx, pair)| {
                let (in_dim, out_dim) = (pair[0], pair[1]);
                let bound = if idx == last {
                    3e-3
                } else {
                    1.0 / (in_dim as f64).sqrt()
                };
                Layer {
                    in_dim,
                    out_dim,
                    w: (0..in_dim * out_dim)
                        .map(|_| rng.random_range(-bound..bound))
                        .collect(),
                    b: vec![0.0; out_dim],
                }
            })
            .collect();
        Mlp {
            layers,
            output_activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.out_dim));
        sizes
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Plain forward pass.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut current = input.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&current, &mut next);
            if idx < last {
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
            } else if self.output_activation == OutputActivation::Tanh {
                for v in next.iter_mut() {
                    *v = v.tanh();
                }
            }
            std::mem::swap(&mut current, &mut next);
        }
        current
    }

    /// Forward pass retaining everything backprop needs.
    pub fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.forward_into(&current, &mut z);
            layer_inputs.push(std::mem::take(&mut current));
            let mut a = z.clone();
            if idx < last {
                for v in a.iter_mut() {
                    *v = v.max(0.0);
                }
            } else if self.output_activation == OutputActivation::Tanh {
                for v in a.iter_mut() {
                    *v = v.tanh();
                }
            }
            pre_activations.push(z);
            current = a;
        }
        ForwardCache {
            layer_inputs,
            pre_activations,
            output: current,
        }
    }

    /// Backpropagate `grad_output` (dL/d output) through the cached pass,
    /// accumulating parameter gradients into `grads` and returning dL/d input.
    ///
    /// `grad_pre_output` is an optional additional gradient applied directly
    /// to the output layer's pre-activation, used for penalties on the
    /// pre-tanh action.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_output: &[f64],
        grad_pre_output: Option<&[f64]>,
        grads: &mut MlpGrads,
    ) -> Vec<f64> {
        self.backprop(cache, grad_output, grad_pre_output, Some(grads))
    }

    /// Gradient of the scalar chain w.r.t. the network input only, leaving
    /// parameters untouched. Used when differentiating through a frozen net.
    pub fn input_gradient(&self, cache: &ForwardCache, grad_output: &[f64]) -> Vec<f64> {
        self.backprop(cache, grad_output, None, None)
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        grad_output: &[f64],
        grad_pre_output: Option<&[f64]>,
        mut grads: Option<&mut MlpGrads>,
    ) -> Vec<f64> {
        debug_assert_eq!(grad_output.len(), self.output_dim());
        let last = self.layers.len() - 1;

        // Delta at the output layer: chain through the output activation.
        let mut delta: Vec<f64> = match self.output_activation {
            OutputActivation::Identity => grad_output.to_vec(),
            OutputActivation::Tanh => cache.output
                .iter()
                .zip(grad_output)
                .map(|(a, g)| g * (1.0 - a * a))
                .collect(),
        };
        if let Some(pre) = grad_pre_output {
            for (d, p) in delta.iter_mut().zip(pre) {
                *d += p;
            }
        }

        for idx in (0..=last).rev() {
            let layer = &self.layers[idx];
            let input = &cache.layer_inputs[idx];
            if let Some(g) = grads.as_deref_mut() {
                let (gw, gb) = &mut g.layers[idx];
                for o in 0..layer.out_dim {
                    let d = delta[o];
                    if d != 0.0 {
                        let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                        for (gwi, xi) in row.iter_mut().zip(input) {
                            *gwi = d.mul_add(*xi, *gwi);
                        }
                    }
                    gb[o] += d;
                }
            }

            // dL/d input of this layer.
            let mut grad_in = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let d = delta[o];
                if d != 0.0 {
                    let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (gi, wi) in grad_in.iter_mut().zip(row) {
                        *gi = d.mul_add(*wi, *gi);
                    }
                }
            }

            if idx > 0 {
                // Chain through the previous layer's ReLU.
                let prev_z = &cache.pre_activations[idx - 1];
                for (gi, z) in grad_in.iter_mut().zip(prev_z) {
                    if *z <= 0.0 {
                        *gi = 0.0;
                    }
                }
            }
            delta = grad_in;
        }
        delta
    }

    /// One plain SGD step: `p -= lr * g` (pass a negative `lr` for ascent).
    pub fn apply_gradients(&mut self, grads: &MlpGrads, lr: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, g) in layer.w.iter_mut().zip(gw) {
                *w -= lr * g;
            }
            for (b, g) in layer.b.iter_mut().zip(gb) {
                *b -= lr * g;
            }
        }
    }

    /// Polyak update: `self = (1 - tau) * self + tau * online`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        assert_eq!(self.layer_sizes(), online.layer_sizes(), "shape mismatch");
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            for (tw, ow) in t.w.iter_mut().zip(&o.w) {
                *tw += tau * (*ow - *tw);
            }
            for (tb, ob) in t.b.iter_mut().zip(&o.b) {
                *tb += tau * (*ob - *tb);
            }
        }
    }

    /// Flatten all parameters (layer order, weights then biases).
    pub fn get_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.w);
            out.extend_from_slice(&layer.b);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter count mismatch");
        let mut offset = 0;
        for layer in &mut self.layers {
            let wl = layer.w.len();
            layer.w.copy_from_slice(&params[offset..offset + wl]);
            offset += wl;
            let bl = layer.b.len();
            layer.b.copy_from_slice(&params[offset..offset + bl]);
            offset += bl;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(&l.b).all(|v| v.is_finite()))
    }
}

//! Fully-connected network with hand-derived backpropagation.
//!
//! Hidden layers use tanh; the output layer is linear and carries mean and
//! raw log-variance heads. Log-variances pass through a smooth double
//! softplus clamp so gradients stay well-defined at the bounds.

use ndarray::{Array1, Array2, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::normal_draw;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct Mlp {
    /// Layer weights, each `out x in`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Smoothly clamps a raw log-variance into (min_lv, max_lv); returns the
/// clamped value and its derivative with respect to the raw input.
pub(crate) fn soft_clamp(raw: f64, min_lv: f64, max_lv: f64) -> (f64, f64) {
    let upper = max_lv - softplus(max_lv - raw);
    let d_upper = sigmoid(max_lv - raw);
    let value = min_lv + softplus(upper - min_lv);
    let d_value = sigmoid(upper - min_lv);
    (value, d_upper * d_value)
}

/// z = x * w^T + b with a fixed accumulation order, so results are
/// bit-reproducible regardless of allocator or thread behavior.
fn linear_forward(x: &Array2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let (m, k) = x.dim();
    let (out, k2) = w.dim();
    debug_assert_eq!(k, k2);
    let mut z = Array2::zeros((m, out));
    // transposed weight copy lets the inner loop run over output columns
    let ws = w.as_slice().expect("contiguous");
    let mut wt = vec![0.0f64; k * out];
    for j in 0..out {
        for t in 0..k {
            wt[t * out + j] = ws[j * k + t];
        }
    }
    let xs = x.as_slice().expect("contiguous");
    let bs = b.as_slice().expect("contiguous");
    let zs = z.as_slice_mut().expect("contiguous");
    for i in 0..m {
        let zrow = &mut zs[i * out..(i + 1) * out];
        zrow.copy_from_slice(bs);
        let xrow = &xs[i * k..(i + 1) * k];
        for (t, &xv) in xrow.iter().enumerate() {
            let wrow = &wt[t * out..(t + 1) * out];
            for j in 0..out {
                zrow[j] += xv * wrow[j];
            }
        }
    }
    z
}

/// g = delta^T * acts, accumulated sample by sample in a fixed order.
fn weight_grad(delta: &Array2<f64>, acts: &Array2<f64>) -> Array2<f64> {
    let (m, out) = delta.dim();
    let k = acts.ncols();
    let mut g = Array2::zeros((out, k));
    let ds = delta.as_slice().expect("contiguous");
    let as_ = acts.as_slice().expect("contiguous");
    let gs = g.as_slice_mut().expect("contiguous");
    for i in 0..m {
        let drow = &ds[i * out..(i + 1) * out];
        let arow = &as_[i * k..(i + 1) * k];
        for (j, &dv) in drow.iter().enumerate() {
            if dv == 0.0 {
                continue;
            }
            let grow = &mut gs[j * k..(j + 1) * k];
            for t in 0..k {
                grow[t] += dv * arow[t];
            }
        }
    }
    g
}

/// prev = delta * w, accumulated output unit by output unit.
fn input_grad(delta: &Array2<f64>, w: &Array2<f64>) -> Array2<f64> {
    let (m, out) = delta.dim();
    let k = w.ncols();
    let mut prev = Array2::zeros((m, k));
    let ds = delta.as_slice().expect("contiguous");
    let ws = w.as_slice().expect("contiguous");
    let ps = prev.as_slice_mut().expect("contiguous");
    for i in 0..m {
        let drow = &ds[i * out..(i + 1) * out];
        let prow = &mut ps[i * k..(i + 1) * k];
        for (j, &dv) in drow.iter().enumerate() {
            if dv == 0.0 {
                continue;
            }
            let wrow = &ws[j * k..(j + 1) * k];
            for t in 0..k {
                prow[t] += dv * wrow[t];
            }
        }
    }
    prev
}

impl Mlp {
    /// Random initialization: N(0, (scale / sqrt(fan_in))^2) weights, zero biases.
    pub fn init(layer_dims: &[usize], scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let std = scale / (fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| normal_draw(rng, 0.0, std));
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Self { weights, biases }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.first().expect("network has layers").ncols()
    }

    /// Forward pass keeping every post-activation for the backward pass.
    /// `activations[0]` is the input; the last entry is the linear output.
    pub fn forward_cached(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let layers = self.weights.len();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.clone());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = linear_forward(&acts[l], w, b);
            if l + 1 < layers {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let layers = self.weights.len();
        let mut h = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = linear_forward(&h, w, b);
            if l + 1 < layers {
                z.mapv_inplace(f64::tanh);
            }
            h = z;
        }
        h
    }

    /// Backpropagates `d_out` (gradient of the loss in the linear output)
    /// through the cached activations.
    pub fn backward(&self, acts: &[Array2<f64>], d_out: Array2<f64>) -> MlpGrads {
        let layers = self.weights.len();
        let mut d_weights = vec![Array2::zeros((0, 0)); layers];
        let mut d_biases = vec![Array1::zeros(0); layers];
        let mut delta = d_out;
        for l in (0..layers).rev() {
            d_weights[l] = weight_grad(&delta, &acts[l]);
            d_biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                // propagate through the tanh of layer l-1's output
                let mut prev = input_grad(&delta, &self.weights[l]);
                prev.zip_mut_with(&acts[l], |d, &a| *d *= 1.0 - a * a);
                delta = prev;
            }
        }
        MlpGrads {
            weights: d_weights,
            biases: d_biases,
        }
    }

    pub fn apply_update(&mut self, grads: &MlpGrads, lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            w.scaled_add(-lr, g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            b.scaled_add(-lr, g);
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn get_param(&self, idx: usize) -> f64 {
        let mut rest = idx;
        for w in &self.weights {
            if rest < w.len() {
                return w.as_slice().expect("contiguous")[rest];
            }
            rest -= w.len();
        }
        for b in &self.biases {
            if rest < b.len() {
                return b[rest];
            }
            rest -= b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        let mut rest = idx;
        for w in self.weights.iter_mut() {
            if rest < w.len() {
                w.as_slice_mut().expect("contiguous")[rest] = value;
                return;
            }
            rest -= w.len();
        }
        for b in self.biases.iter_mut() {
            if rest < b.len() {
                b[rest] = value;
                return;
            }
            rest -= b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn grad_at(grads: &MlpGrads, idx: usize) -> f64 {
        let mut rest = idx;
        for w in &grads.weights {
            if rest < w.len() {
                return w.as_slice().expect("contiguous")[rest];
            }
            rest -= w.len();
        }
        for b in &grads.biases {
            if rest < b.len() {
                return b[rest];
            }
            rest -= b.len();
        }
        panic!("gradient index out of range");
    }
}

#[derive(Debug, Clone)]
pub(crate) struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Which objective the trainer differentiates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Loss {
    /// Gaussian negative log likelihood with clamped log-variance heads;
    /// outputs are [means (d), raw log-variances (d)] for d targets.
    GaussianNll { min_logvar: f64, max_logvar: f64 },
    /// Plain mean squared error over all outputs (test oracle for gradients).
    #[allow(dead_code)]
    Squared,
}

/// Mean loss over the batch and its gradient in the network output.
pub(crate) fn loss_and_grad(
    loss: Loss,
    out: &Array2<f64>,
    targets: &Array2<f64>,
) -> (f64, Array2<f64>) {
    let batch = out.nrows() as f64;
    match loss {
        Loss::Squared => {
            let diff = out - targets;
            let value = diff.mapv(|v| v * v).sum() / batch;
            (value, diff.mapv(|v| 2.0 * v / batch))
        }
        Loss::GaussianNll {
            min_logvar,
            max_logvar,
        } => {
            let d = targets.ncols();
            debug_assert_eq!(out.ncols(), 2 * d);
            let mut grad = Array2::zeros(out.raw_dim());
            let mut total = 0.0;
            const LN_TAU: f64 = 1.8378770664093453; // ln(2*pi)
            for i in 0..out.nrows() {
                for j in 0..d {
                    let mu = out[[i, j]];
                    let raw = out[[i, d + j]];
                    let (lv, dlv_draw) = soft_clamp(raw, min_logvar, max_logvar);
                    let inv_var = (-lv).exp();
                    let err = targets[[i, j]] - mu;
                    total += 0.5 * (err * err * inv_var + lv + LN_TAU);
                    grad[[i, j]] = -err * inv_var / batch;
                    grad[[i, d + j]] = 0.5 * (1.0 - err * err * inv_var) * dlv_draw / batch;
                }
            }
            (total / batch, grad)
        }
    }
}

pub(crate) fn non_finite(x: f64) -> bool {
    !x.is_finite()
}

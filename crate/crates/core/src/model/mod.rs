//! Bootstrapped ensemble of probabilistic dynamics models.
//!
//! Each member is a small tanh network mapping (one-hot group, state, action)
//! to Gaussian moments over (next state, reward). Members train by plain
//! minibatch gradient descent on the Gaussian negative log likelihood, each
//! on its own with-replacement resample of the data. Inputs and targets are
//! standardized with statistics frozen at fit time; gradients are derived by
//! hand and validated against finite differences by [`grad_check`].

mod net;

pub(crate) use net::Loss;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causal::{GroupLabel, TrajectoryDataset};
use crate::envs::normal_draw;
use crate::rng::{stream_id, substream};
use net::{loss_and_grad, Mlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub ensemble_size: usize,
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_init_scale: f64,
    pub min_logvar: f64,
    pub max_logvar: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 5,
            hidden_layers: vec![32, 32],
            learning_rate: 1e-3,
            epochs: 300,
            batch_size: 64,
            weight_init_scale: 1.0,
            min_logvar: -10.0,
            max_logvar: 2.0,
        }
    }
}

impl EnsembleConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if self.ensemble_size == 0
            || self.hidden_layers.iter().any(|&w| w == 0)
            || self.min_logvar >= self.max_logvar
        {
            return Err(ModelError::InvalidConfig);
        }
        Ok(())
    }
}

/// Standardization statistics; stds are floored so the round trip is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct NormStats {
    pub in_mean: Vec<f64>,
    pub in_std: Vec<f64>,
    pub out_mean: Vec<f64>,
    pub out_std: Vec<f64>,
}

const STD_FLOOR: f64 = 1e-6;

impl NormStats {
    fn identity(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_mean: vec![0.0; in_dim],
            in_std: vec![1.0; in_dim],
            out_mean: vec![0.0; out_dim],
            out_std: vec![1.0; out_dim],
        }
    }

    fn from_columns(x: &Array2<f64>, y: &Array2<f64>) -> Self {
        let column_stats = |m: &Array2<f64>| {
            let n = m.nrows() as f64;
            let mut means = Vec::with_capacity(m.ncols());
            let mut stds = Vec::with_capacity(m.ncols());
            for col in m.columns() {
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                means.push(mean);
                stds.push(var.sqrt().max(STD_FLOOR));
            }
            (means, stds)
        };
        let (in_mean, in_std) = column_stats(x);
        let (out_mean, out_std) = column_stats(y);
        Self {
            in_mean,
            in_std,
            out_mean,
            out_std,
        }
    }

    pub(crate) fn normalize_in(&self, x: &mut Array2<f64>) {
        for mut row in x.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.in_mean[j]) / self.in_std[j];
            }
        }
    }

    fn normalize_out(&self, y: &mut Array2<f64>) {
        for mut row in y.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.out_mean[j]) / self.out_std[j];
            }
        }
    }
}

/// Per-epoch mean NLL across members; entry 0 is measured before training.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub epoch_nll: Vec<f64>,
}

/// Gaussian moments predicted for one (group, state, action) input.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub next_mean: Vec<f64>,
    pub next_var: Vec<f64>,
    pub reward_mean: f64,
    pub reward_var: f64,
}

#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub config: EnsembleConfig,
    pub state_dim: usize,
    pub action_dim: usize,
    pub(crate) members: Vec<Mlp>,
    pub(crate) norm: NormStats,
    trained: bool,
}

impl EnsembleModel {
    /// Fresh ensemble with random weights and identity normalization.
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        config: EnsembleConfig,
        seed: u64,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let in_dim = 2 + state_dim + action_dim;
        let out_dim = 2 * (state_dim + 1);
        let mut dims = vec![in_dim];
        dims.extend_from_slice(&config.hidden_layers);
        dims.push(out_dim);
        let members = (0..config.ensemble_size)
            .map(|b| {
                let mut rng = substream(seed, stream_id(&[0x696e_6974, b as u64]));
                Mlp::init(&dims, config.weight_init_scale, &mut rng)
            })
            .collect();
        Ok(Self {
            config,
            state_dim,
            action_dim,
            members,
            norm: NormStats::identity(in_dim, state_dim + 1),
            trained: false,
        })
    }

    pub fn ensemble_size(&self) -> usize {
        self.members.len()
    }

    pub fn input_dim(&self) -> usize {
        2 + self.state_dim + self.action_dim
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Marks hand-assembled members as usable by the planner (tests only).
    #[cfg(test)]
    pub(crate) fn mark_trained(&mut self) {
        self.trained = true;
    }

    /// Raw (unnormalized) input row layout: [one-hot z, state, action].
    pub fn fill_input_row(&self, z: GroupLabel, state: &[f64], action: &[f64], row: &mut [f64]) {
        debug_assert_eq!(row.len(), self.input_dim());
        row[0] = if z == GroupLabel::Z0 { 1.0 } else { 0.0 };
        row[1] = if z == GroupLabel::Z1 { 1.0 } else { 0.0 };
        row[2..2 + state.len()].copy_from_slice(state);
        row[2 + state.len()..].copy_from_slice(action);
    }

    fn design_matrices(&self, data: &TrajectoryDataset) -> (Array2<f64>, Array2<f64>) {
        let n = data.records.len();
        let mut x = Array2::zeros((n, self.input_dim()));
        let mut y = Array2::zeros((n, self.state_dim + 1));
        for (i, rec) in data.records.iter().enumerate() {
            self.fill_input_row(
                rec.group,
                &rec.state,
                &rec.action,
                x.row_mut(i).as_slice_mut().expect("contiguous"),
            );
            for d in 0..self.state_dim {
                y[[i, d]] = rec.next_state[d];
            }
            y[[i, self.state_dim]] = rec.reward;
        }
        (x, y)
    }

    /// Trains every member on its own bootstrap resample of `data`.
    ///
    /// Refitting an already-trained model warm-starts from the current
    /// parameters and keeps the normalization statistics from the first fit,
    /// so the learning loop can keep training one ensemble as its buffer
    /// grows.
    pub fn fit(&mut self, data: &TrajectoryDataset, seed: u64) -> Result<FitReport, ModelError> {
        if data.records.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        if data.state_dim != self.state_dim || data.action_dim != self.action_dim {
            return Err(ModelError::LayoutMismatch {
                expected: (self.state_dim, self.action_dim),
                got: (data.state_dim, data.action_dim),
            });
        }
        if self.config.epochs == 0 {
            return Ok(FitReport {
                epoch_nll: Vec::new(),
            });
        }
        let (mut x, mut y) = self.design_matrices(data);
        if !self.trained {
            self.norm = NormStats::from_columns(&x, &y);
        }
        self.norm.normalize_in(&mut x);
        self.norm.normalize_out(&mut y);
        let n = x.nrows();
        let loss = Loss::GaussianNll {
            min_logvar: self.config.min_logvar,
            max_logvar: self.config.max_logvar,
        };
        let epochs = self.config.epochs;
        let batch = self.config.batch_size.max(1);
        let mut per_member_nll = vec![vec![0.0; epochs + 1]; self.members.len()];
        for (b, member) in self.members.iter_mut().enumerate() {
            let mut rng = substream(seed, stream_id(&[0x6669_74, b as u64]));
            let mut indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            per_member_nll[b][0] = eval_nll(member, &x, &y, &indices, loss);
            for epoch in 0..epochs {
                // Fisher-Yates reshuffle of the member's resample
                for i in (1..indices.len()).rev() {
                    indices.swap(i, rng.gen_range(0..=i));
                }
                let mut start = 0;
                while start < n {
                    let end = (start + batch).min(n);
                    let rows = &indices[start..end];
                    let xb = gather_rows(&x, rows);
                    let yb = gather_rows(&y, rows);
                    let acts = member.forward_cached(&xb);
                    let (_, d_out) = loss_and_grad(loss, acts.last().expect("output"), &yb);
                    let grads = member.backward(&acts, d_out);
                    member.apply_update(&grads, self.config.learning_rate);
                    start = end;
                }
                let nll = eval_nll(member, &x, &y, &indices, loss);
                if net::non_finite(nll) {
                    return Err(ModelError::NonFinite { epoch });
                }
                per_member_nll[b][epoch + 1] = nll;
            }
        }
        self.trained = true;
        let members = self.members.len() as f64;
        let epoch_nll = (0..=epochs)
            .map(|e| per_member_nll.iter().map(|m| m[e]).sum::<f64>() / members)
            .collect();
        Ok(FitReport { epoch_nll })
    }

    /// Denormalized Gaussian moments for a batch of raw input rows.
    /// Returns `(means, vars)`, each `batch x (state_dim + 1)` with the
    /// reward in the last column.
    pub fn predict_batch(&self, member: usize, inputs: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let mut x = inputs.clone();
        self.norm.normalize_in(&mut x);
        let out = self.members[member].forward(&x);
        let d = self.state_dim + 1;
        let mut means = Array2::zeros((x.nrows(), d));
        let mut vars = Array2::zeros((x.nrows(), d));
        for i in 0..x.nrows() {
            for j in 0..d {
                let (lv, _) = net::soft_clamp(
                    out[[i, d + j]],
                    self.config.min_logvar,
                    self.config.max_logvar,
                );
                let scale = self.norm.out_std[j];
                means[[i, j]] = out[[i, j]] * scale + self.norm.out_mean[j];
                vars[[i, j]] = lv.exp() * scale * scale;
            }
        }
        (means, vars)
    }

    /// Normalized-space moments, used by tests asserting the clamp bounds.
    pub fn predict_normalized(
        &self,
        member: usize,
        z: GroupLabel,
        state: &[f64],
        action: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let mut x = Array2::zeros((1, self.input_dim()));
        self.fill_input_row(z, state, action, x.row_mut(0).as_slice_mut().expect("contiguous"));
        self.norm.normalize_in(&mut x);
        let out = self.members[member].forward(&x);
        let d = self.state_dim + 1;
        let means = (0..d).map(|j| out[[0, j]]).collect();
        let logvars = (0..d)
            .map(|j| {
                net::soft_clamp(
                    out[[0, d + j]],
                    self.config.min_logvar,
                    self.config.max_logvar,
                )
                .0
            })
            .collect();
        (means, logvars)
    }

    /// Predicted moments for a single (group, state, action) triple.
    pub fn predict(
        &self,
        member: usize,
        z: GroupLabel,
        state: &[f64],
        action: &[f64],
    ) -> Prediction {
        let mut x = Array2::zeros((1, self.input_dim()));
        self.fill_input_row(z, state, action, x.row_mut(0).as_slice_mut().expect("contiguous"));
        let (means, vars) = self.predict_batch(member, &x);
        let d = self.state_dim;
        Prediction {
            next_mean: (0..d).map(|j| means[[0, j]]).collect(),
            next_var: (0..d).map(|j| vars[[0, j]]).collect(),
            reward_mean: means[[0, d]],
            reward_var: vars[[0, d]],
        }
    }

    /// Draws (next state, reward) from the member's predicted Gaussian.
    pub fn sample_transition(
        &self,
        member: usize,
        z: GroupLabel,
        state: &[f64],
        action: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> (Vec<f64>, f64) {
        let p = self.predict(member, z, state, action);
        let next = p
            .next_mean
            .iter()
            .zip(&p.next_var)
            .map(|(&m, &v)| normal_draw(rng, m, v.sqrt()))
            .collect();
        let reward = normal_draw(rng, p.reward_mean, p.reward_var.sqrt());
        (next, reward)
    }

    /// Spread of member mean predictions at one input; grows off-distribution.
    pub fn disagreement(&self, z: GroupLabel, state: &[f64], action: &[f64]) -> f64 {
        let d = self.state_dim + 1;
        let mut x = Array2::zeros((1, self.input_dim()));
        self.fill_input_row(z, state, action, x.row_mut(0).as_slice_mut().expect("contiguous"));
        let means: Vec<Vec<f64>> = (0..self.members.len())
            .map(|b| {
                let (m, _) = self.predict_batch(b, &x);
                (0..d).map(|j| m[[0, j]]).collect()
            })
            .collect();
        let mut total = 0.0;
        for j in 0..d {
            let mean = means.iter().map(|m| m[j]).sum::<f64>() / means.len() as f64;
            total += means.iter().map(|m| (m[j] - mean) * (m[j] - mean)).sum::<f64>()
                / means.len() as f64;
        }
        total.sqrt()
    }
}

fn gather_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), m.ncols()));
    for (i, &r) in rows.iter().enumerate() {
        out.row_mut(i).assign(&m.row(r));
    }
    out
}

fn eval_nll(member: &Mlp, x: &Array2<f64>, y: &Array2<f64>, indices: &[usize], loss: Loss) -> f64 {
    let xb = gather_rows(x, indices);
    let yb = gather_rows(y, indices);
    let out = member.forward(&xb);
    loss_and_grad(loss, &out, &yb).0
}

/// Compares analytic gradients with central finite differences (h = 1e-5)
/// over every parameter of a randomly initialized network on the Gaussian
/// NLL; returns the largest relative error.
pub fn grad_check(config: &EnsembleConfig, seed: u64) -> f64 {
    let loss = Loss::GaussianNll {
        min_logvar: config.min_logvar,
        max_logvar: config.max_logvar,
    };
    grad_check_with_loss(config, seed, loss)
}

pub(crate) fn grad_check_with_loss(config: &EnsembleConfig, seed: u64, loss: Loss) -> f64 {
    let mut rng = substream(seed, 0x6763);
    let in_dim = 4;
    let d_targets = 2;
    let out_dim = match loss {
        Loss::GaussianNll { .. } => 2 * d_targets,
        Loss::Squared => d_targets,
    };
    let mut dims = vec![in_dim];
    dims.extend_from_slice(&config.hidden_layers);
    dims.push(out_dim);
    let mut net = Mlp::init(&dims, config.weight_init_scale.max(0.5), &mut rng);
    let batch = 8;
    let x = Array2::from_shape_fn((batch, in_dim), |_| normal_draw(&mut rng, 0.0, 1.0));
    let y = Array2::from_shape_fn((batch, d_targets), |_| normal_draw(&mut rng, 0.0, 1.0));

    let acts = net.forward_cached(&x);
    let (_, d_out) = loss_and_grad(loss, acts.last().expect("output"), &y);
    let grads = net.backward(&acts, d_out);

    let h = 1e-5;
    let mut max_rel = 0.0f64;
    for idx in 0..net.param_count() {
        let orig = net.get_param(idx);
        net.set_param(idx, orig + h);
        let up = loss_and_grad(loss, &net.forward(&x), &y).0;
        net.set_param(idx, orig - h);
        let down = loss_and_grad(loss, &net.forward(&x), &y).0;
        net.set_param(idx, orig);
        let numeric = (up - down) / (2.0 * h);
        let analytic = Mlp::grad_at(&grads, idx);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        max_rel = max_rel.max(rel);
    }
    max_rel
}

/// Versioned JSON checkpoint: config, normalization, and member parameters.
#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: EnsembleConfig,
    state_dim: usize,
    action_dim: usize,
    norm: NormStats,
    members: Vec<Mlp>,
    trained: bool,
}

const CHECKPOINT_VERSION: u32 = 1;

impl EnsembleModel {
    pub fn save(&self, path: &std::path::Path) -> Result<(), ModelError> {
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            norm: self.norm.clone(),
            members: self.members.clone(),
            trained: self.trained,
        };
        let json = serde_json::to_string(&ckpt)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Loads a checkpoint, refusing any whose input layout does not match
    /// the expected state/action dimensions.
    pub fn load(
        path: &std::path::Path,
        state_dim: usize,
        action_dim: usize,
    ) -> Result<Self, ModelError> {
        let json = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&json)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(ModelError::UnsupportedVersion(ckpt.version));
        }
        if ckpt.state_dim != state_dim || ckpt.action_dim != action_dim {
            return Err(ModelError::LayoutMismatch {
                expected: (state_dim, action_dim),
                got: (ckpt.state_dim, ckpt.action_dim),
            });
        }
        let in_dim = 2 + state_dim + action_dim;
        if ckpt.members.iter().any(|m| m.input_dim() != in_dim) {
            return Err(ModelError::LayoutMismatch {
                expected: (state_dim, action_dim),
                got: (ckpt.state_dim, ckpt.action_dim),
            });
        }
        Ok(Self {
            config: ckpt.config,
            state_dim: ckpt.state_dim,
            action_dim: ckpt.action_dim,
            members: ckpt.members,
            norm: ckpt.norm,
            trained: ckpt.trained,
        })
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data is empty")]
    EmptyDataset,
    #[error("invalid ensemble configuration")]
    InvalidConfig,
    #[error("training loss became non-finite at epoch {epoch} (reduce learning_rate)")]
    NonFinite { epoch: usize },
    #[error("checkpoint layout mismatch: expected (state, action) dims {expected:?}, got {got:?}")]
    LayoutMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("planner requires a trained model")]
    Untrained,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Serde(#[from] serde_json::Error),
}

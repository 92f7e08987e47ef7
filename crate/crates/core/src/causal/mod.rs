//! Causal effect estimation over logged transitions.
//!
//! Estimates the total, natural direct, and natural indirect effects of a
//! binary group attribute on per-step reward and next state, decomposes the
//! discounted well-being gap into per-step direct/indirect contributions, and
//! decides whether the environment dynamics violate fairness. All estimators
//! are plug-in sums over a discretized (state, action) grid; uncertainty comes
//! from seeded, group-stratified bootstrap resampling.

mod decompose;
mod effects;
mod fairness;
mod io;
mod oracle;
mod tables;

pub use decompose::{decompose_gap, DecompositionReport, StepEffects};
pub use effects::{
    estimate_nde_next_state, estimate_nde_reward, estimate_nie_reward, estimate_reward_effects,
    estimate_te_reward, nde_next_state_point, nde_reward_point, nie_reward_point,
    te_reward_point, BootstrapConfig, RewardEffects,
};
pub use fairness::{check_dynamics_fairness, FairnessVerdict};
pub use io::{read_jsonl, write_effects_csv, write_jsonl, write_report_csv};
pub use oracle::{
    oracle_effects, random_scm, sample_scm_dataset, scm_discretization, DiscreteScm, OracleEffects,
};
pub use tables::ConditionalTables;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Binary sensitive attribute distinguishing the two demographic groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum GroupLabel {
    Z0,
    Z1,
}

impl GroupLabel {
    pub const BOTH: [GroupLabel; 2] = [GroupLabel::Z0, GroupLabel::Z1];

    pub fn index(self) -> usize {
        match self {
            GroupLabel::Z0 => 0,
            GroupLabel::Z1 => 1,
        }
    }

    pub fn other(self) -> GroupLabel {
        match self {
            GroupLabel::Z0 => GroupLabel::Z1,
            GroupLabel::Z1 => GroupLabel::Z0,
        }
    }
}

impl TryFrom<u8> for GroupLabel {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(GroupLabel::Z0),
            1 => Ok(GroupLabel::Z1),
            other => Err(format!("group label must be 0 or 1, got {other}")),
        }
    }
}

impl From<GroupLabel> for u8 {
    fn from(g: GroupLabel) -> u8 {
        g.index() as u8
    }
}

/// One logged environment step for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    #[serde(rename = "z")]
    pub group: GroupLabel,
    #[serde(rename = "s")]
    pub state: Vec<f64>,
    #[serde(rename = "a")]
    pub action: Vec<f64>,
    #[serde(rename = "r")]
    pub reward: f64,
    #[serde(rename = "s2")]
    pub next_state: Vec<f64>,
    #[serde(rename = "t")]
    pub step: usize,
}

/// An ordered set of transition records with fixed dimensions and discount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub records: Vec<TransitionRecord>,
    pub state_dim: usize,
    pub action_dim: usize,
    pub discount: f64,
}

impl TrajectoryDataset {
    pub fn new(
        records: Vec<TransitionRecord>,
        state_dim: usize,
        action_dim: usize,
        discount: f64,
    ) -> Result<Self, CausalError> {
        if records.is_empty() {
            return Err(CausalError::EmptyDataset);
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(CausalError::InvalidDiscount(discount));
        }
        for (i, rec) in records.iter().enumerate() {
            if rec.state.len() != state_dim
                || rec.next_state.len() != state_dim
                || rec.action.len() != action_dim
            {
                return Err(CausalError::DimensionMismatch { record: i });
            }
            if !rec.reward.is_finite() {
                return Err(CausalError::NonFiniteReward { record: i });
            }
        }
        Ok(Self {
            records,
            state_dim,
            action_dim,
            discount,
        })
    }

    pub fn group_count(&self, group: GroupLabel) -> usize {
        self.records.iter().filter(|r| r.group == group).count()
    }

    pub fn max_step(&self) -> usize {
        self.records.iter().map(|r| r.step).max().unwrap_or(0)
    }
}

/// Equal-width binning grid for states and actions, with Laplace smoothing.
///
/// Bounds run over state dimensions first, then action dimensions.
/// Out-of-bounds values clamp to the edge bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationSpec {
    pub state_bins: Vec<usize>,
    pub action_bins: Vec<usize>,
    pub bounds: Vec<(f64, f64)>,
    pub laplace_alpha: f64,
}

impl DiscretizationSpec {
    pub fn new(
        state_bins: Vec<usize>,
        action_bins: Vec<usize>,
        bounds: Vec<(f64, f64)>,
        laplace_alpha: f64,
    ) -> Result<Self, CausalError> {
        let spec = Self {
            state_bins,
            action_bins,
            bounds,
            laplace_alpha,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Uniform grid: `bins` equal-width bins per state dimension over shared
    /// bounds, and identity bins for a finite action menu of `menu_size`
    /// integer-valued points.
    pub fn uniform(
        state_dim: usize,
        bins: usize,
        state_lo: f64,
        state_hi: f64,
        menu_size: usize,
    ) -> Result<Self, CausalError> {
        let mut bounds = vec![(state_lo, state_hi); state_dim];
        bounds.push((-0.5, menu_size as f64 - 0.5));
        Self::new(vec![bins; state_dim], vec![menu_size], bounds, 1.0)
    }

    fn validate(&self) -> Result<(), CausalError> {
        let dims = self.state_bins.len() + self.action_bins.len();
        if dims == 0 || self.bounds.len() != dims {
            return Err(CausalError::DegenerateSpec(
                "bounds must cover every state and action dimension".into(),
            ));
        }
        for (d, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo < hi) {
                return Err(CausalError::DegenerateSpec(format!(
                    "dimension {d} has zero or negative width [{lo}, {hi}]"
                )));
            }
        }
        for &b in self.state_bins.iter().chain(self.action_bins.iter()) {
            if b == 0 {
                return Err(CausalError::DegenerateSpec("bin count must be >= 1".into()));
            }
        }
        if self.laplace_alpha < 0.0 {
            return Err(CausalError::DegenerateSpec(
                "laplace_alpha must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn bins_per_dim(&self) -> Vec<usize> {
        self.state_bins
            .iter()
            .chain(self.action_bins.iter())
            .copied()
            .collect()
    }

    /// Total number of cells in the joint (state, action) grid.
    pub fn grid_size(&self) -> f64 {
        self.bins_per_dim().iter().map(|&b| b as f64).product()
    }

    pub(crate) fn bin_of(&self, dim: usize, value: f64) -> usize {
        let (lo, hi) = self.bounds[dim];
        let bins = self.bins_per_dim()[dim];
        let width = (hi - lo) / bins as f64;
        let idx = ((value - lo) / width).floor();
        idx.clamp(0.0, bins as f64 - 1.0) as usize
    }

    /// Flattened grid index of a record's (state, action) pair.
    pub(crate) fn flat_bin(&self, state: &[f64], action: &[f64]) -> u64 {
        let mut flat: u64 = 0;
        let bins = self.bins_per_dim();
        for (d, &v) in state.iter().chain(action.iter()).enumerate() {
            flat = flat * bins[d] as u64 + self.bin_of(d, v) as u64;
        }
        flat
    }
}

/// Which causal quantity an estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectKind {
    TeR,
    NdeR,
    NieR,
    NdeSprime,
    TeG,
}

impl EffectKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EffectKind::TeR => "te_r",
            EffectKind::NdeR => "nde_r",
            EffectKind::NieR => "nie_r",
            EffectKind::NdeSprime => "nde_sprime",
            EffectKind::TeG => "te_g",
        }
    }
}

/// A named causal quantity with bootstrap uncertainty.
///
/// Scalar effects use length-1 vectors; `NdeSprime` has one entry per state
/// dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub kind: EffectKind,
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_effective: usize,
}

impl EffectEstimate {
    pub fn scalar(&self) -> f64 {
        debug_assert_eq!(self.value.len(), 1);
        self.value[0]
    }

    pub fn scalar_stderr(&self) -> f64 {
        debug_assert_eq!(self.stderr.len(), 1);
        self.stderr[0]
    }

    /// Largest-magnitude component (signed).
    pub fn max_abs_component(&self) -> f64 {
        self.value
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Error)]
pub enum CausalError {
    #[error("dataset contains no records")]
    EmptyDataset,
    #[error("group z{} has no records", .0.index())]
    EmptyGroup(GroupLabel),
    #[error("degenerate discretization spec: {0}")]
    DegenerateSpec(String),
    #[error("record {record} does not match the dataset dimensions")]
    DimensionMismatch { record: usize },
    #[error("record {record} has a non-finite reward")]
    NonFiniteReward { record: usize },
    #[error("discount must lie in [0, 1), got {0}")]
    InvalidDiscount(f64),
    #[error("step {step} has no records for group z{}", .group.index())]
    MissingStep { step: usize, group: GroupLabel },
    #[error("SCM enumeration would visit {requested} noise combinations (cap {cap})")]
    SupportTooLarge { requested: u128, cap: u128 },
    #[error("malformed record on line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

//! Two-group MDP simulators with configurable advantage parameters.
//!
//! Both environments run the two demographic groups side by side: the agent
//! issues one action per group, receives one reward per group, and the groups
//! never interact. The `alpha` pair skews the reward channel and the `beta`
//! pair skews the transition channel; the relative advantage of a group is
//! the positive part of its own entry minus the other's, so equal pairs make
//! the dynamics group-symmetric.

mod allocation;
mod lending;
mod rollout;

pub use allocation::{step_allocation, AllocationEnv, AllocationParams};
pub use lending::{step_lending, LendingEnv, LendingParams};
pub use rollout::{rollout, Policy, UniformRandomPolicy};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::causal::{DiscretizationSpec, GroupLabel};

/// A (first, second) parameter pair controlling which group is favored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct AdvantagePair {
    pub first: f64,
    pub second: f64,
}

impl AdvantagePair {
    pub fn new(first: f64, second: f64) -> Self {
        Self { first, second }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0)
    }

    /// Relative advantage of `group`: positive for the favored group, zero
    /// for the other (and for both when the pair is balanced).
    pub fn advantage(&self, group: GroupLabel) -> f64 {
        match group {
            GroupLabel::Z0 => (self.first - self.second).max(0.0),
            GroupLabel::Z1 => (self.second - self.first).max(0.0),
        }
    }
}

impl From<[f64; 2]> for AdvantagePair {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<AdvantagePair> for [f64; 2] {
    fn from(p: AdvantagePair) -> [f64; 2] {
        [p.first, p.second]
    }
}

/// Joint per-group environment state plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEnvState {
    pub group_states: [Vec<f64>; 2],
    pub step: usize,
}

impl GroupEnvState {
    pub fn state_of(&self, group: GroupLabel) -> &[f64] {
        &self.group_states[group.index()]
    }

    /// L1 disparity between the two group states.
    pub fn disparity(&self) -> f64 {
        self.group_states[0]
            .iter()
            .zip(&self.group_states[1])
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// One menu index per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAction {
    pub indices: [usize; 2],
}

impl GroupAction {
    pub fn new(z0: usize, z1: usize) -> Self {
        Self { indices: [z0, z1] }
    }

    pub fn shared(index: usize) -> Self {
        Self::new(index, index)
    }
}

/// Per-group bookkeeping emitted by a step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupStepInfo {
    pub incidents: u32,
    pub resolved: f64,
    pub repaid: u32,
    pub defaulted: u32,
}

/// Rewards, successor state, and info for one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rewards: [f64; 2],
    pub next: GroupEnvState,
    pub info: [GroupStepInfo; 2],
}

/// How model-predicted states are forced back into the valid state set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateProjection {
    ClampBox { lo: f64, hi: f64 },
    Simplex,
}

impl StateProjection {
    pub fn apply(&self, state: &mut [f64]) {
        match *self {
            StateProjection::ClampBox { lo, hi } => {
                for v in state.iter_mut() {
                    *v = v.clamp(lo, hi);
                }
            }
            StateProjection::Simplex => {
                let mut total = 0.0;
                for v in state.iter_mut() {
                    *v = v.max(0.0);
                    total += *v;
                }
                if total > 0.0 {
                    for v in state.iter_mut() {
                        *v /= total;
                    }
                } else if let Some(first) = state.first_mut() {
                    *first = 1.0;
                }
            }
        }
    }
}

/// Static facts about an environment that the planner needs.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    /// Continuous embedding of the finite action menu, in menu order.
    pub menu: Vec<f64>,
    pub state_dim: usize,
    pub projection: StateProjection,
}

impl EnvSpec {
    pub fn menu_bounds(&self) -> (f64, f64) {
        (self.menu[0], *self.menu.last().expect("menu is nonempty"))
    }

    /// Index of the menu point nearest to a continuous sample.
    pub fn nearest_menu_index(&self, value: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, &m) in self.menu.iter().enumerate() {
            let d = (value - m).abs();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        best
    }
}

/// A two-group environment with owned state and RNG.
pub trait GroupEnv {
    fn reset(&mut self, seed: u64) -> GroupEnvState;
    fn step(&mut self, action: &GroupAction) -> StepOutcome;
    fn state(&self) -> &GroupEnvState;
    fn env_spec(&self) -> EnvSpec;
    fn episode_len(&self) -> usize;
    fn discount(&self) -> f64;
    /// Binning suited to this environment's state/action ranges.
    fn default_discretization(&self) -> DiscretizationSpec;
}

/// Seeded Gaussian draw (Box-Muller; one value per call so substream layouts
/// stay simple).
pub fn normal_draw(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    use rand::Rng;
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    mean + std * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

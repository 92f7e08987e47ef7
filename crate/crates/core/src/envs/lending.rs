//! Lending-v0: group credit-score distributions and loan thresholds.
//!
//! Each group carries a five-bin credit-score distribution. Every step a
//! fixed number of applicants is drawn per group; those at or above the
//! group's threshold receive loans and repay with a score-dependent
//! probability (scaled up for the reward-channel advantaged group). The
//! reward is interest on repayments minus default costs. Each repayment
//! shifts probability mass one bin up (scaled by the transition-channel
//! advantage) and each default shifts mass one bin down; shifts are capped by
//! the mass actually present so the state stays a distribution by
//! construction, with a clamp-and-rescale guard against accumulated rounding.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    AdvantagePair, EnvSpec, GroupAction, GroupEnv, GroupEnvState, GroupStepInfo, StateProjection,
    StepOutcome,
};
use crate::causal::{DiscretizationSpec, GroupLabel};
use crate::rng::substream;

pub const SCORE_BINS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LendingParams {
    /// Initial credit-score distributions (z0, z1).
    #[serde(rename = "init")]
    pub init_dists: [[f64; SCORE_BINS]; 2],
    pub alpha: AdvantagePair,
    pub beta: AdvantagePair,
    /// Mass moved per repayment/default event.
    pub shift_mass: f64,
    pub interest: f64,
    pub default_cost: f64,
    pub applicants_per_step: usize,
    /// Base repayment probability per score bin.
    pub base_repay: [f64; SCORE_BINS],
    pub episode_len: usize,
    pub discount: f64,
    pub advantage_channel_swap: bool,
}

impl Default for LendingParams {
    fn default() -> Self {
        Self {
            init_dists: [[0.0, 0.2, 0.3, 0.3, 0.2], [0.0, 0.2, 0.3, 0.3, 0.2]],
            alpha: AdvantagePair::zero(),
            beta: AdvantagePair::zero(),
            shift_mass: 0.01,
            interest: 1.0,
            default_cost: 1.0,
            applicants_per_step: 10,
            base_repay: [0.1, 0.3, 0.5, 0.7, 0.9],
            episode_len: 100,
            discount: 0.99,
            advantage_channel_swap: false,
        }
    }
}

impl LendingParams {
    pub fn unfair_dynamics() -> Self {
        Self {
            alpha: AdvantagePair::new(0.0, 0.01),
            beta: AdvantagePair::new(0.0, 0.05),
            ..Self::default()
        }
    }

    pub fn fair_dynamics() -> Self {
        Self {
            init_dists: [[0.0, 0.2, 0.35, 0.25, 0.2], [0.0, 0.2, 0.25, 0.35, 0.2]],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for dist in &self.init_dists {
            let total: f64 = dist.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(format!("initial distribution sums to {total}, not 1"));
            }
            if dist.iter().any(|&v| v < 0.0) {
                return Err("initial distribution has a negative entry".into());
            }
            let min_positive = dist
                .iter()
                .copied()
                .filter(|&v| v > 0.0)
                .fold(f64::INFINITY, f64::min);
            if !(self.shift_mass > 0.0 && self.shift_mass < min_positive) {
                return Err("shift_mass must lie in (0, min positive mass)".into());
            }
        }
        Ok(())
    }

    fn reward_pair(&self) -> AdvantagePair {
        if self.advantage_channel_swap {
            self.beta
        } else {
            self.alpha
        }
    }

    fn transition_pair(&self) -> AdvantagePair {
        if self.advantage_channel_swap {
            self.alpha
        } else {
            self.beta
        }
    }
}

/// Moves up to `amount` of mass from `from` to `to`, capped by what `from`
/// holds; total mass is conserved exactly.
pub(crate) fn shift_mass(dist: &mut [f64], from: usize, to: usize, amount: f64) {
    let moved = amount.min(dist[from]);
    dist[from] -= moved;
    dist[to] += moved;
}

fn sample_bin(dist: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.len() - 1
}

/// One step of the lending dynamics; pure given the RNG.
pub fn step_lending(
    state: &GroupEnvState,
    action: &GroupAction,
    params: &LendingParams,
    rng: &mut ChaCha8Rng,
) -> StepOutcome {
    let mut rewards = [0.0; 2];
    let mut info = [GroupStepInfo::default(); 2];
    let mut next = state.clone();
    for g in GroupLabel::BOTH {
        let gi = g.index();
        let threshold = action.indices[gi];
        let adv_r = params.reward_pair().advantage(g);
        let adv_t = params.transition_pair().advantage(g);
        // applicants are drawn from the start-of-step distribution
        let start_dist = state.group_states[gi].clone();
        let applicant_bins: Vec<usize> = (0..params.applicants_per_step)
            .map(|_| sample_bin(&start_dist, rng))
            .collect();
        let dist = &mut next.group_states[gi];
        for bin in applicant_bins {
            if bin < threshold {
                continue;
            }
            let p_repay = (params.base_repay[bin] * (1.0 + adv_r)).clamp(0.0, 1.0);
            if rng.gen::<f64>() < p_repay {
                rewards[gi] += params.interest;
                info[gi].repaid += 1;
                if bin + 1 < SCORE_BINS {
                    shift_mass(dist, bin, bin + 1, params.shift_mass * (1.0 + adv_t));
                }
            } else {
                rewards[gi] -= params.default_cost;
                info[gi].defaulted += 1;
                if bin > 0 {
                    shift_mass(dist, bin, bin - 1, params.shift_mass);
                }
            }
        }
        // guard against accumulated rounding only; shifts conserve mass
        let mut total = 0.0;
        for v in dist.iter_mut() {
            *v = v.max(0.0);
            total += *v;
        }
        for v in dist.iter_mut() {
            *v /= total;
        }
    }
    next.step = state.step + 1;
    StepOutcome {
        rewards,
        next,
        info,
    }
}

/// Owned simulator state for Lending-v0.
#[derive(Debug, Clone)]
pub struct LendingEnv {
    pub params: LendingParams,
    state: GroupEnvState,
    rng: ChaCha8Rng,
}

impl LendingEnv {
    pub fn new(params: LendingParams) -> Self {
        let state = GroupEnvState {
            group_states: [params.init_dists[0].to_vec(), params.init_dists[1].to_vec()],
            step: 0,
        };
        Self {
            params,
            state,
            rng: substream(0, 0),
        }
    }

    /// Menu: thresholds 0..SCORE_BINS grant bins >= threshold; SCORE_BINS
    /// grants nothing.
    fn menu(&self) -> Vec<f64> {
        (0..=SCORE_BINS).map(|i| i as f64).collect()
    }
}

impl GroupEnv for LendingEnv {
    fn reset(&mut self, seed: u64) -> GroupEnvState {
        self.state = GroupEnvState {
            group_states: [
                self.params.init_dists[0].to_vec(),
                self.params.init_dists[1].to_vec(),
            ],
            step: 0,
        };
        self.rng = substream(seed, 0x6c656e64);
        self.state.clone()
    }

    fn step(&mut self, action: &GroupAction) -> StepOutcome {
        let outcome = step_lending(&self.state, action, &self.params, &mut self.rng);
        self.state = outcome.next.clone();
        outcome
    }

    fn state(&self) -> &GroupEnvState {
        &self.state
    }

    fn env_spec(&self) -> EnvSpec {
        EnvSpec {
            menu: self.menu(),
            state_dim: SCORE_BINS,
            projection: StateProjection::Simplex,
        }
    }

    fn episode_len(&self) -> usize {
        self.params.episode_len
    }

    fn discount(&self) -> f64 {
        self.params.discount
    }

    fn default_discretization(&self) -> DiscretizationSpec {
        DiscretizationSpec::uniform(SCORE_BINS, 4, 0.0, 1.0, SCORE_BINS + 1)
            .expect("lending grid is valid")
    }
}

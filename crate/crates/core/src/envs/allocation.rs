//! Allocation-v0: per-site incident rates and resource allocation.
//!
//! Each group is a site whose scalar state is the mean of a Gaussian incident
//! count. Allocated units resolve incidents (scaled up for the reward-channel
//! advantaged group); the reward is the negative count of missed incidents
//! minus the allocation cost. Sites that resolve more than half their
//! incidents see their rate drift down, others drift up, with the
//! transition-channel advantage scaling the drift in the favored direction.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    AdvantagePair, EnvSpec, GroupAction, GroupEnv, GroupEnvState, GroupStepInfo, StateProjection,
    StepOutcome,
};
use crate::causal::{DiscretizationSpec, GroupLabel};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocationParams {
    /// Initial incident rates (z0, z1).
    #[serde(rename = "init")]
    pub init_rates: [f64; 2],
    pub alpha: AdvantagePair,
    pub beta: AdvantagePair,
    pub rate_delta: f64,
    pub rate_max: f64,
    pub allocation_cost: f64,
    /// Menu is 0..=max_allocation units.
    pub max_allocation: usize,
    pub episode_len: usize,
    pub discount: f64,
    /// Swap which pair feeds the reward vs transition channel.
    pub advantage_channel_swap: bool,
}

impl Default for AllocationParams {
    fn default() -> Self {
        Self {
            init_rates: [6.0, 6.0],
            alpha: AdvantagePair::zero(),
            beta: AdvantagePair::zero(),
            rate_delta: 0.1,
            rate_max: 12.0,
            allocation_cost: 0.4,
            max_allocation: 10,
            episode_len: 100,
            discount: 0.99,
            advantage_channel_swap: false,
        }
    }
}

impl AllocationParams {
    /// Unfair-dynamics configuration: equal starts, z1 favored in both channels.
    pub fn unfair_dynamics() -> Self {
        Self {
            init_rates: [6.0, 6.0],
            alpha: AdvantagePair::new(0.0, 0.05),
            beta: AdvantagePair::new(0.0, 0.05),
            ..Self::default()
        }
    }

    /// Fair-dynamics configuration: z0 starts worse, no advantages.
    pub fn fair_dynamics() -> Self {
        Self {
            init_rates: [6.2, 6.0],
            ..Self::default()
        }
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

/// One step of the allocation dynamics; pure given the RNG.
pub fn step_allocation(
    state: &GroupEnvState,
    action: &GroupAction,
    params: &AllocationParams,
    rng: &mut ChaCha8Rng,
) -> StepOutcome {
    let mut rewards = [0.0; 2];
    let mut info = [GroupStepInfo::default(); 2];
    let mut next = state.clone();
    for g in GroupLabel::BOTH {
        let gi = g.index();
        let rate = state.group_states[gi][0];
        let allocated = action.indices[gi].min(params.max_allocation) as f64;
        let incidents = super::normal_draw(rng, rate, 1.0).round().max(0.0);
        let capacity = allocated * (1.0 + params.reward_pair().advantage(g));
        let resolved = incidents.min(capacity);
        rewards[gi] = -(incidents - resolved) - params.allocation_cost * allocated;
        let adv_t = params.transition_pair().advantage(g);
        let new_rate = if resolved > incidents / 2.0 {
            rate - params.rate_delta * (1.0 + adv_t)
        } else {
            rate + params.rate_delta * (1.0 - adv_t)
        };
        next.group_states[gi][0] = new_rate.clamp(0.0, params.rate_max);
        info[gi] = GroupStepInfo {
            incidents: incidents as u32,
            resolved,
            ..GroupStepInfo::default()
        };
    }
    next.step = state.step + 1;
    StepOutcome {
        rewards,
        next,
        info,
    }
}

/// Owned simulator state for Allocation-v0.
#[derive(Debug, Clone)]
pub struct AllocationEnv {
    pub params: AllocationParams,
    state: GroupEnvState,
    rng: ChaCha8Rng,
}

impl AllocationEnv {
    pub fn new(params: AllocationParams) -> Self {
        let state = GroupEnvState {
            group_states: [vec![params.init_rates[0]], vec![params.init_rates[1]]],
            step: 0,
        };
        Self {
            params,
            state,
            rng: substream(0, 0),
        }
    }
}

impl GroupEnv for AllocationEnv {
    fn reset(&mut self, seed: u64) -> GroupEnvState {
        self.state = GroupEnvState {
            group_states: [
                vec![self.params.init_rates[0]],
                vec![self.params.init_rates[1]],
            ],
            step: 0,
        };
        self.rng = substream(seed, 0x616c6c6f);
        self.state.clone()
    }

    fn step(&mut self, action: &GroupAction) -> StepOutcome {
        let outcome = step_allocation(&self.state, action, &self.params, &mut self.rng);
        self.state = outcome.next.clone();
        outcome
    }

    fn state(&self) -> &GroupEnvState {
        &self.state
    }

    fn env_spec(&self) -> EnvSpec {
        EnvSpec {
            menu: (0..=self.params.max_allocation).map(|i| i as f64).collect(),
            state_dim: 1,
            projection: StateProjection::ClampBox {
                lo: 0.0,
                hi: self.params.rate_max,
            },
        }
    }

    fn episode_len(&self) -> usize {
        self.params.episode_len
    }

    fn discount(&self) -> f64 {
        self.params.discount
    }

    fn default_discretization(&self) -> DiscretizationSpec {
        DiscretizationSpec::uniform(
            1,
            24,
            0.0,
            self.params.rate_max,
            self.params.max_allocation + 1,
        )
        .expect("allocation grid is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(r0: f64, r1: f64) -> GroupEnvState {
        GroupEnvState {
            group_states: [vec![r0], vec![r1]],
            step: 0,
        }
    }

    /// Drives the step with many seeds until the sampled incident count hits
    /// the wanted value, so the deterministic parts can be checked exactly.
    fn step_with_incidents(
        start: &GroupEnvState,
        action: &GroupAction,
        params: &AllocationParams,
        want: u32,
    ) -> StepOutcome {
        for seed in 0..10_000 {
            let mut rng = substream(seed, 1);
            let outcome = step_allocation(start, action, params, &mut rng);
            if outcome.info[0].incidents == want {
                return outcome;
            }
        }
        panic!("no seed produced {want} incidents");
    }

    #[test]
    fn resolving_most_incidents_lowers_the_rate() {
        let params = AllocationParams::default();
        // 4 allocated out of 6 incidents resolves more than half
        let outcome = step_with_incidents(&state(6.0, 6.0), &GroupAction::new(4, 4), &params, 6);
        assert!((outcome.next.group_states[0][0] - 5.9).abs() < 1e-12);
        assert!((outcome.info[0].resolved - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_allocation_misses_everything_at_no_cost() {
        let params = AllocationParams::default();
        let outcome = step_with_incidents(&state(6.0, 6.0), &GroupAction::new(0, 0), &params, 7);
        assert!((outcome.rewards[0] - (-7.0)).abs() < 1e-12);
        // unresolved majority: rate drifts up
        assert!((outcome.next.group_states[0][0] - 6.1).abs() < 1e-12);
    }

    #[test]
    fn reward_includes_the_allocation_cost() {
        let params = AllocationParams::default();
        let outcome = step_with_incidents(&state(6.0, 6.0), &GroupAction::new(10, 10), &params, 6);
        // all 6 resolved, cost 10 * 0.4
        assert!((outcome.rewards[0] - (-4.0)).abs() < 1e-12);
    }

    #[test]
    fn balanced_pairs_treat_groups_identically() {
        let params = AllocationParams {
            alpha: AdvantagePair::new(0.3, 0.3),
            beta: AdvantagePair::new(0.2, 0.2),
            ..AllocationParams::default()
        };
        // same rate, same action: outcomes must be exchangeable up to the
        // incident draws, so the deterministic maps must coincide
        for g in GroupLabel::BOTH {
            assert_eq!(params.reward_pair().advantage(g), 0.0);
            assert_eq!(params.transition_pair().advantage(g), 0.0);
        }
    }

    #[test]
    fn advantaged_group_resolves_more_per_unit() {
        let params = AllocationParams {
            alpha: AdvantagePair::new(0.0, 0.5),
            ..AllocationParams::default()
        };
        let outcome = step_with_incidents(&state(6.0, 6.0), &GroupAction::new(4, 4), &params, 6);
        // z1 capacity 4 * 1.5 = 6 >= incidents for z1 whenever its draw <= 6;
        // z0 capacity stays 4
        assert!((outcome.info[0].resolved - 4.0).abs() < 1e-12);
        assert!(outcome.info[1].resolved >= 4.0);
    }

    #[test]
    fn transition_advantage_scales_the_drift_both_ways() {
        let params = AllocationParams {
            beta: AdvantagePair::new(0.0, 0.5),
            ..AllocationParams::default()
        };
        let down = step_with_incidents(&state(6.0, 6.0), &GroupAction::new(10, 10), &params, 6);
        // both resolve all: z1 drops by delta * 1.5, z0 by delta
        assert!((down.next.group_states[0][0] - 5.9).abs() < 1e-12);
        assert!((down.next.group_states[1][0] - 5.85).abs() < 1e-12);
        let up = step_with_incidents(&state(6.0, 6.0), &GroupAction::new(0, 0), &params, 6);
        // both miss all: z0 rises by delta, z1 by delta * 0.5
        assert!((up.next.group_states[0][0] - 6.1).abs() < 1e-12);
        assert!((up.next.group_states[1][0] - 6.05).abs() < 1e-12);
    }

    #[test]
    fn rates_clamp_to_the_valid_band() {
        let params = AllocationParams::default();
        let low = step_with_incidents(&state(0.0, 0.0), &GroupAction::new(10, 10), &params, 1);
        assert!(low.next.group_states[0][0] >= 0.0);
        let high = step_with_incidents(&state(12.0, 12.0), &GroupAction::new(0, 0), &params, 12);
        assert!(high.next.group_states[0][0] <= params.rate_max);
    }

    #[test]
    fn table_reset_values() {
        let mut env = AllocationEnv::new(AllocationParams::unfair_dynamics());
        let s = env.reset(0);
        assert_eq!(s.group_states[0][0], 6.0);
        assert_eq!(s.group_states[1][0], 6.0);
        let mut fair = AllocationEnv::new(AllocationParams::fair_dynamics());
        let s = fair.reset(0);
        assert_eq!(s.group_states[0][0], 6.2);
        assert_eq!(s.group_states[1][0], 6.0);
    }
}

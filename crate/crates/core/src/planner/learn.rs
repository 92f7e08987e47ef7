//! Model-based learning loop: collect, fit, judge fairness, plan, act.
//!
//! Each epoch retrains the ensemble on everything observed so far, judges
//! dynamics fairness on the replay buffer with a bootstrap-calibrated
//! threshold, then runs one episode acting through the planner with the
//! fairness flag held fixed for the whole episode.

use rand_chacha::ChaCha8Rng;

use super::{plan, PlanConfig, PlannerError};
use crate::causal::{
    check_dynamics_fairness, BootstrapConfig, ConditionalTables, GroupLabel, TransitionRecord,
    TrajectoryDataset,
};
use crate::envs::{GroupEnv, UniformRandomPolicy};
use crate::envs::Policy;
use crate::model::{EnsembleConfig, EnsembleModel};
use crate::rng::{stream_id, substream};

#[derive(Debug, Clone)]
pub struct LearnConfig {
    pub epochs: usize,
    /// Episodes collected with a uniform random policy before epoch 0.
    pub init_random_episodes: usize,
    pub plan: PlanConfig,
    pub fit: EnsembleConfig,
    /// Fairness threshold; None calibrates from the bootstrap.
    pub tau: Option<f64>,
    pub bootstrap_resamples: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            init_random_episodes: 2,
            plan: PlanConfig::default(),
            fit: EnsembleConfig::default(),
            tau: None,
            bootstrap_resamples: 200,
        }
    }
}

/// One planner-controlled step of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub action_z0: f64,
    pub action_z1: f64,
    pub reward_z0: f64,
    pub reward_z1: f64,
    /// L1 disparity of the state the planner acted on.
    pub state_disparity: f64,
    /// |action_z0 - action_z1| in menu units.
    pub decision_gap: f64,
}

/// One epoch of the learning loop.
#[derive(Debug, Clone)]
pub struct EpochLog {
    pub epoch: usize,
    /// Discounted return summed over both groups.
    pub return_total: f64,
    pub returns: [f64; 2],
    /// Discounted G_{z1} - G_{z0} realized in the episode.
    pub gap: f64,
    pub df_violated: bool,
    pub nde_r: f64,
    /// Largest-magnitude component of the estimated NDE on the next state.
    pub nde_sprime: f64,
    pub threshold: f64,
    pub steps: Vec<StepLog>,
}

/// Fits `model` on the buffer, evaluates dynamics fairness, then acts for one
/// episode, appending the new transitions to the buffer.
pub fn run_episode(
    env: &mut dyn GroupEnv,
    model: &mut EnsembleModel,
    buffer: &mut Vec<TransitionRecord>,
    config: &LearnConfig,
    epoch: usize,
    seed: u64,
) -> Result<EpochLog, PlannerError> {
    let env_spec = env.env_spec();
    let dataset = TrajectoryDataset::new(
        buffer.clone(),
        env_spec.state_dim,
        1,
        env.discount(),
    )?;
    model.fit(&dataset, stream_id(&[seed, 0x666974, epoch as u64]))?;

    let tables = ConditionalTables::fit(&dataset, &env.default_discretization())?;
    let verdict = check_dynamics_fairness(
        &tables,
        config.tau,
        &BootstrapConfig {
            resamples: config.bootstrap_resamples,
            seed: stream_id(&[seed, 0x646621, epoch as u64]),
        },
    )?;
    let df_violated = verdict.violated;

    let mut state = env.reset(stream_id(&[seed, 0x657069, epoch as u64]));
    let gamma = env.discount();
    let mut discount_pow = 1.0;
    let mut returns = [0.0f64; 2];
    let mut steps = Vec::with_capacity(env.episode_len());
    for t in 0..env.episode_len() {
        let mut plan_rng: ChaCha8Rng = substream(
            seed,
            stream_id(&[0x706c616e, epoch as u64, t as u64]),
        );
        let (action, _) = plan(model, &env_spec, &state, &config.plan, df_violated, &mut plan_rng)?;
        let outcome = env.step(&action);
        let a0 = env_spec.menu[action.indices[0]];
        let a1 = env_spec.menu[action.indices[1]];
        steps.push(StepLog {
            step: t,
            action_z0: a0,
            action_z1: a1,
            reward_z0: outcome.rewards[0],
            reward_z1: outcome.rewards[1],
            state_disparity: state.disparity(),
            decision_gap: (a0 - a1).abs(),
        });
        for g in GroupLabel::BOTH {
            let gi = g.index();
            returns[gi] += discount_pow * outcome.rewards[gi];
            buffer.push(TransitionRecord {
                group: g,
                state: state.group_states[gi].clone(),
                action: vec![env_spec.menu[action.indices[gi]]],
                reward: outcome.rewards[gi],
                next_state: outcome.next.group_states[gi].clone(),
                step: t,
            });
        }
        discount_pow *= gamma;
        state = outcome.next;
    }
    Ok(EpochLog {
        epoch,
        return_total: returns[0] + returns[1],
        returns,
        gap: returns[1] - returns[0],
        df_violated,
        nde_r: verdict.nde_r.scalar(),
        nde_sprime: verdict.nde_sprime.max_abs_component(),
        threshold: verdict.threshold,
        steps,
    })
}

/// Full learning run: seed the buffer with random episodes, then iterate
/// epochs of fit / fairness check / planned episode over one warm-started
/// ensemble.
pub fn learn(
    env: &mut dyn GroupEnv,
    config: &LearnConfig,
    seed: u64,
) -> Result<Vec<EpochLog>, PlannerError> {
    let env_spec = env.env_spec();
    let mut policy = UniformRandomPolicy {
        menu_size: env_spec.menu.len(),
    };
    let mut buffer = Vec::new();
    for episode in 0..config.init_random_episodes.max(1) {
        let mut state = env.reset(stream_id(&[seed, 0x696e6974, episode as u64]));
        let mut policy_rng = substream(seed, stream_id(&[0x72706f6c, episode as u64]));
        for t in 0..env.episode_len() {
            let action = policy.act(&state, &mut policy_rng);
            let outcome = env.step(&action);
            for g in GroupLabel::BOTH {
                let gi = g.index();
                buffer.push(TransitionRecord {
                    group: g,
                    state: state.group_states[gi].clone(),
                    action: vec![env_spec.menu[action.indices[gi]]],
                    reward: outcome.rewards[gi],
                    next_state: outcome.next.group_states[gi].clone(),
                    step: t,
                });
            }
            state = outcome.next;
        }
    }

    // one ensemble, warm-started across epochs; each epoch still retrains on
    // the whole buffer, and the accumulated passes let the model resolve the
    // small group contrasts the fairness penalty needs
    let mut model = EnsembleModel::new(
        env_spec.state_dim,
        1,
        config.fit.clone(),
        stream_id(&[seed, 0x6d6f64]),
    )?;
    let mut logs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let log = run_episode(env, &mut model, &mut buffer, config, epoch, seed)?;
        logs.push(log);
    }
    Ok(logs)
}

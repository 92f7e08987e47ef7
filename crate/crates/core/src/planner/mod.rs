//! Cross-entropy-method planning over the learned ensemble.
//!
//! Candidates are per-step continuous action values inside the menu bounds,
//! one sequence per group (or a single shared sequence when the planner is
//! allowed to treat groups identically). Each candidate is rolled out for the
//! horizon with a fixed number of particles, every particle bound to one
//! ensemble member for the whole rollout; rankings use the discounted return
//! regularized according to the planning mode. Executed actions are the
//! nearest menu points of the best sample's first step.

mod learn;

pub use learn::{learn, run_episode, EpochLog, LearnConfig, StepLog};

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causal::CausalError;
use crate::envs::{EnvSpec, GroupAction, GroupEnvState};
use crate::model::{EnsembleModel, ModelError};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanMode {
    Pets,
    FairA,
    FairS,
    InsightFair,
}

impl PlanMode {
    pub const ALL: [PlanMode; 4] = [
        PlanMode::Pets,
        PlanMode::FairA,
        PlanMode::FairS,
        PlanMode::InsightFair,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PlanMode::Pets => "pets",
            PlanMode::FairA => "fair-a",
            PlanMode::FairS => "fair-s",
            PlanMode::InsightFair => "insightfair",
        }
    }
}

impl std::str::FromStr for PlanMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pets" => Ok(PlanMode::Pets),
            "fair-a" | "faira" => Ok(PlanMode::FairA),
            "fair-s" | "fairs" => Ok(PlanMode::FairS),
            "insightfair" | "insight-fair" => Ok(PlanMode::InsightFair),
            other => Err(format!("unknown planning mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanConfig {
    pub horizon: usize,
    pub population: usize,
    pub elites: usize,
    pub iterations: usize,
    pub particles: usize,
    /// Weight on the |simulated well-being gap| penalty (InsightFair).
    pub lambda: f64,
    /// State-disparity threshold below which a fair environment is planned
    /// with one shared action sequence (InsightFair).
    pub epsilon: f64,
    pub discount: f64,
    pub mode: PlanMode,
    /// Weight on the simulated terminal state disparity (Fair-S).
    pub state_penalty: f64,
    /// Keep the best sample in the next iteration's pool.
    pub elite_retention: bool,
    pub std_floor: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            population: 200,
            elites: 20,
            iterations: 5,
            particles: 5,
            lambda: 1.0,
            epsilon: 0.05,
            discount: 0.99,
            mode: PlanMode::Pets,
            state_penalty: 1.0,
            elite_retention: true,
            std_floor: 1e-3,
        }
    }
}

impl PlanConfig {
    fn validate(&self) -> Result<(), PlannerError> {
        if self.horizon == 0
            || self.population == 0
            || self.elites == 0
            || self.elites > self.population
            || self.particles == 0
            || self.iterations == 0
        {
            return Err(PlannerError::InvalidConfig);
        }
        Ok(())
    }
}

/// Per-step, per-group sampling distribution over the menu's continuous
/// embedding. In shared mode both group slots mirror each other.
#[derive(Debug, Clone)]
pub struct ActionDistribution {
    pub mean: Vec<[f64; 2]>,
    pub std: Vec<[f64; 2]>,
    pub shared: bool,
    pub bounds: (f64, f64),
}

impl ActionDistribution {
    /// Broad initialization: midpoint mean, half-range std.
    pub fn broad(horizon: usize, bounds: (f64, f64), shared: bool) -> Self {
        let mid = 0.5 * (bounds.0 + bounds.1);
        let spread = 0.5 * (bounds.1 - bounds.0);
        Self {
            mean: vec![[mid; 2]; horizon],
            std: vec![[spread; 2]; horizon],
            shared,
            bounds,
        }
    }
}

/// One sampled action sequence: `actions[t][group]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub actions: Vec<[f64; 2]>,
}

/// A candidate together with its simulated evaluation.
#[derive(Debug, Clone)]
pub struct CandidateEval {
    pub candidate: Candidate,
    /// Discounted per-group returns averaged over particles.
    pub returns: [f64; 2],
    /// Simulated well-being gap G_{z1} - G_{z0}.
    pub gap: f64,
    /// Mean L1 disparity of the simulated terminal states.
    pub terminal_disparity: f64,
    pub objective: f64,
}

/// Per-call planning trace used by tests and diagnostics.
#[derive(Debug, Clone)]
pub struct PlanDiagnostics {
    pub best_objective_per_iteration: Vec<f64>,
    pub shared_actions: bool,
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid planner configuration")]
    InvalidConfig,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Causal(#[from] CausalError),
}

/// Runs the CEM loop and returns the first action of the best sample,
/// projected onto the menu.
pub fn plan(
    model: &EnsembleModel,
    env_spec: &EnvSpec,
    state: &GroupEnvState,
    config: &PlanConfig,
    df_violated: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(GroupAction, PlanDiagnostics), PlannerError> {
    config.validate()?;
    if !model.is_trained() {
        return Err(PlannerError::Model(ModelError::Untrained));
    }
    let disparity = state.disparity();
    let shared = match config.mode {
        PlanMode::FairA => true,
        PlanMode::InsightFair => !df_violated && disparity <= config.epsilon,
        PlanMode::Pets | PlanMode::FairS => false,
    };
    let mut dist = ActionDistribution::broad(config.horizon, env_spec.menu_bounds(), shared);
    let mut best: Option<CandidateEval> = None;
    let mut diagnostics = PlanDiagnostics {
        best_objective_per_iteration: Vec::with_capacity(config.iterations),
        shared_actions: shared,
    };
    for _ in 0..config.iterations {
        let mut candidates = sample_candidates(&dist, config.population, rng);
        if config.elite_retention {
            if let Some(prev) = &best {
                candidates[0] = prev.candidate.clone();
            }
        }
        let noise_seed = rng.next_u64();
        let mut evals = evaluate_candidates(model, env_spec, state, &candidates, config, noise_seed);
        sort_by_objective(&mut evals);
        diagnostics
            .best_objective_per_iteration
            .push(evals[0].objective);
        if best.as_ref().map_or(true, |b| evals[0].objective >= b.objective) {
            best = Some(evals[0].clone());
        }
        let elites = &evals[..config.elites.min(evals.len())];
        dist = update_distribution(&dist, elites, config.std_floor);
    }
    let best = best.expect("iterations >= 1");
    let first = best.candidate.actions[0];
    let action = GroupAction::new(
        env_spec.nearest_menu_index(first[0]),
        env_spec.nearest_menu_index(first[1]),
    );
    Ok((action, diagnostics))
}

/// Stable descending sort by objective; ties keep sampling order.
pub(crate) fn sort_by_objective(evals: &mut [CandidateEval]) {
    evals.sort_by(|a, b| b.objective.total_cmp(&a.objective));
}

fn sample_candidates(
    dist: &ActionDistribution,
    population: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Candidate> {
    let (lo, hi) = dist.bounds;
    (0..population)
        .map(|_| {
            let actions = dist
                .mean
                .iter()
                .zip(&dist.std)
                .map(|(mean, std)| {
                    let a0 = crate::envs::normal_draw(rng, mean[0], std[0]).clamp(lo, hi);
                    if dist.shared {
                        [a0, a0]
                    } else {
                        [a0, crate::envs::normal_draw(rng, mean[1], std[1]).clamp(lo, hi)]
                    }
                })
                .collect();
            Candidate { actions }
        })
        .collect()
}

/// Refits the sampling distribution to the elites: per-coordinate sample mean
/// and population standard deviation, floored and clamped to the bounds.
pub fn update_distribution(
    dist: &ActionDistribution,
    elites: &[CandidateEval],
    std_floor: f64,
) -> ActionDistribution {
    assert!(!elites.is_empty(), "need at least one elite");
    let horizon = dist.mean.len();
    let m = elites.len() as f64;
    let mut next = dist.clone();
    for t in 0..horizon {
        for g in 0..2 {
            let mean = elites
                .iter()
                .map(|e| e.candidate.actions[t][g])
                .sum::<f64>()
                / m;
            let var = elites
                .iter()
                .map(|e| {
                    let d = e.candidate.actions[t][g] - mean;
                    d * d
                })
                .sum::<f64>()
                / m;
            next.mean[t][g] = mean.clamp(dist.bounds.0, dist.bounds.1);
            next.std[t][g] = var.sqrt().max(std_floor);
        }
        if dist.shared {
            next.mean[t][1] = next.mean[t][0];
            next.std[t][1] = next.std[t][0];
        }
    }
    next
}

/// Rolls every candidate out for the horizon under the ensemble.
///
/// Particle p of candidate i is bound to member (i * particles + p) mod B for
/// the whole rollout. Gaussian draws come from per-candidate substreams of
/// `noise_seed`, pre-generated in a fixed order, so results are independent
/// of batching and thread count.
pub fn evaluate_candidates(
    model: &EnsembleModel,
    env_spec: &EnvSpec,
    state: &GroupEnvState,
    candidates: &[Candidate],
    config: &PlanConfig,
    noise_seed: u64,
) -> Vec<CandidateEval> {
    let n = candidates.len();
    let p_count = config.particles;
    let horizon = config.horizon;
    let d = env_spec.state_dim;
    let moments = d + 1;
    let members = model.ensemble_size();

    // eps[((i * P + p) * H + t) * moments + m]; the draw is shared by the
    // two groups within a particle (common random numbers), so the sampled
    // noise cancels out of the simulated gap instead of drowning it
    let mut eps = vec![0.0f64; n * p_count * horizon * moments];
    for i in 0..n {
        let mut rng = substream(noise_seed, i as u64);
        let base = i * p_count * horizon * moments;
        for offset in 0..p_count * horizon * moments {
            eps[base + offset] = crate::envs::normal_draw(&mut rng, 0.0, 1.0);
        }
    }

    // particle states, flat: [(i * P + p) * 2 + g] * d
    let mut states = vec![0.0f64; n * p_count * 2 * d];
    for i in 0..n {
        for p in 0..p_count {
            for g in 0..2 {
                let at = ((i * p_count + p) * 2 + g) * d;
                states[at..at + d].copy_from_slice(&state.group_states[g]);
            }
        }
    }
    let mut returns = vec![0.0f64; n * p_count * 2];

    // rows grouped by bound member; fixed for the whole rollout
    let member_rows: Vec<Vec<(usize, usize)>> = (0..members)
        .map(|m| {
            let mut rows = Vec::new();
            for i in 0..n {
                for p in 0..p_count {
                    if (i * p_count + p) % members == m {
                        rows.push((i, p));
                    }
                }
            }
            rows
        })
        .collect();

    let mut discount_pow = 1.0;
    for t in 0..horizon {
        for (m, rows) in member_rows.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let mut x = ndarray::Array2::zeros((rows.len() * 2, model.input_dim()));
            for (row_idx, &(i, p)) in rows.iter().enumerate() {
                for g in 0..2 {
                    let s_at = ((i * p_count + p) * 2 + g) * d;
                    let action = candidates[i].actions[t][g];
                    let menu_value = env_spec.menu[env_spec.nearest_menu_index(action)];
                    let z = if g == 0 {
                        crate::causal::GroupLabel::Z0
                    } else {
                        crate::causal::GroupLabel::Z1
                    };
                    model.fill_input_row(
                        z,
                        &states[s_at..s_at + d],
                        &[menu_value],
                        x.row_mut(row_idx * 2 + g)
                            .as_slice_mut()
                            .expect("contiguous"),
                    );
                }
            }
            let (means, vars) = model.predict_batch(m, &x);
            for (row_idx, &(i, p)) in rows.iter().enumerate() {
                for g in 0..2 {
                    let out_row = row_idx * 2 + g;
                    let e_at = ((i * p_count + p) * horizon + t) * moments;
                    let s_at = ((i * p_count + p) * 2 + g) * d;
                    for dim in 0..d {
                        states[s_at + dim] = means[[out_row, dim]]
                            + vars[[out_row, dim]].sqrt() * eps[e_at + dim];
                    }
                    env_spec.projection.apply(&mut states[s_at..s_at + d]);
                    let reward =
                        means[[out_row, d]] + vars[[out_row, d]].sqrt() * eps[e_at + d];
                    returns[(i * p_count + p) * 2 + g] += discount_pow * reward;
                }
            }
        }
        discount_pow *= config.discount;
    }

    (0..n)
        .map(|i| {
            let mut ret = [0.0f64; 2];
            let mut disparity = 0.0;
            for p in 0..p_count {
                for g in 0..2 {
                    ret[g] += returns[(i * p_count + p) * 2 + g];
                }
                let s0 = ((i * p_count + p) * 2) * d;
                let s1 = ((i * p_count + p) * 2 + 1) * d;
                disparity += (0..d)
                    .map(|dim| (states[s0 + dim] - states[s1 + dim]).abs())
                    .sum::<f64>();
            }
            let particles = p_count as f64;
            ret[0] /= particles;
            ret[1] /= particles;
            disparity /= particles;
            let gap = ret[1] - ret[0];
            let total = ret[0] + ret[1];
            let objective = match config.mode {
                PlanMode::Pets | PlanMode::FairA => total,
                PlanMode::InsightFair => total - config.lambda * gap.abs(),
                PlanMode::FairS => total - config.state_penalty * disparity,
            };
            CandidateEval {
                candidate: candidates[i].clone(),
                returns: ret,
                gap,
                terminal_disparity: disparity,
                objective,
            }
        })
        .collect()
}

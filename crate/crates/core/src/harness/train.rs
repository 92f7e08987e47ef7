//! Training comparisons across planning modes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EnvParams, HarnessError};
use crate::planner::{learn, EpochLog, LearnConfig, PlanMode};
use crate::rng::stream_id;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub params: EnvParams,
    pub algos: Vec<PlanMode>,
    pub seeds: Vec<u64>,
    /// Template learn config; the mode is overridden per algorithm.
    pub learn: LearnConfig,
}

/// All epochs of one (algorithm, seed) run.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub algo: PlanMode,
    pub seed: u64,
    pub epochs: Vec<EpochLog>,
}

/// Runs every (algorithm, seed) pair; pairs are independent and dispatched to
/// a worker pool, gathered by index.
pub fn run_train(config: &TrainConfig) -> Result<Vec<TrainRun>, HarnessError> {
    if config.seeds.is_empty() {
        return Err(HarnessError::Config("train needs at least one seed".into()));
    }
    if config.algos.is_empty() {
        return Err(HarnessError::Config(
            "train needs at least one algorithm".into(),
        ));
    }
    let jobs: Vec<(PlanMode, u64)> = config
        .algos
        .iter()
        .flat_map(|&algo| config.seeds.iter().map(move |&s| (algo, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(algo, seed)| {
            let mut learn_config = config.learn.clone();
            learn_config.plan.mode = algo;
            let mut env = config.params.build();
            let epochs = learn(
                env.as_mut(),
                &learn_config,
                stream_id(&[seed, 0x747261696e]),
            )?;
            Ok(TrainRun { algo, seed, epochs })
        })
        .collect()
}

pub const EPOCHS_CSV_HEADER: &str = "epoch,return,gap,df_flag,nde_r,nde_s";

/// Learning-curve CSV for one run.
pub fn epochs_csv(epochs: &[EpochLog]) -> String {
    let mut out = String::from(EPOCHS_CSV_HEADER);
    out.push('\n');
    for e in epochs {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.epoch,
            e.return_total,
            e.gap,
            u8::from(e.df_violated),
            e.nde_r,
            e.nde_sprime
        ));
    }
    out
}

pub const TRACE_CSV_HEADER: &str =
    "step,action_z0,action_z1,r_z0,r_z1,state_disparity,decision_gap";

/// Within-episode trace CSV for one epoch.
pub fn trace_csv(epoch: &EpochLog) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for s in &epoch.steps {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.step,
            s.action_z0,
            s.action_z1,
            s.reward_z0,
            s.reward_z1,
            s.state_disparity,
            s.decision_gap
        ));
    }
    out
}

/// Seed-averaged learning curve for one algorithm.
pub fn mean_curve_csv(runs: &[&TrainRun]) -> String {
    let mut out = String::from("epoch,return,gap");
    out.push('\n');
    if runs.is_empty() {
        return out;
    }
    let epochs = runs[0].epochs.len();
    let n = runs.len() as f64;
    for e in 0..epochs {
        let ret = runs.iter().map(|r| r.epochs[e].return_total).sum::<f64>() / n;
        let gap = runs.iter().map(|r| r.epochs[e].gap).sum::<f64>() / n;
        out.push_str(&format!("{e},{ret},{gap}\n"));
    }
    out
}

/// Serializable view of the config for the run manifest.
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct TrainConfigSummary {
    pub env: EnvParams,
    pub algos: Vec<String>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
}

impl TrainConfig {
    pub fn manifest_value(&self) -> serde_json::Value {
        serde_json::to_value(TrainConfigSummary {
            env: self.params.clone(),
            algos: self.algos.iter().map(|a| a.as_str().to_string()).collect(),
            seeds: self.seeds.clone(),
            epochs: self.learn.epochs,
        })
        .expect("config serializes")
    }
}

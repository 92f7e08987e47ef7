//! Detection sweeps: natural direct effects over advantage-parameter grids.
//!
//! One sweep varies the reward channel (estimating the direct effect on
//! reward) while the transition channel stays balanced; the other varies the
//! transition channel (estimating the direct effect on the next state). Each
//! grid cell rolls out a uniform random policy in its own environment, fits
//! conditional tables, and records the estimate with its bootstrap threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EnvChoice, EnvParams, HarnessError};
use crate::causal::{
    estimate_nde_next_state, estimate_nde_reward, BootstrapConfig, ConditionalTables,
};
use crate::envs::{
    AdvantagePair, AllocationParams, LendingParams, UniformRandomPolicy,
};
use crate::envs::rollout;
use crate::rng::stream_id;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Reward,
    Transition,
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "reward" => Ok(Channel::Reward),
            "transition" => Ok(Channel::Transition),
            other => Err(format!("unknown channel '{other}'")),
        }
    }
}

impl Channel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Reward => "reward",
            Channel::Transition => "transition",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectConfig {
    pub env: EnvChoice,
    pub channel: Channel,
    /// Grid resolution per axis.
    pub grid: usize,
    /// Episodes rolled out per cell.
    pub episodes: usize,
    pub seed: u64,
    pub bootstrap_resamples: usize,
    /// Base environment parameters; the swept pair is replaced per cell.
    pub base: Option<EnvParams>,
}

impl DetectConfig {
    pub fn new(env: EnvChoice, channel: Channel, grid: usize, episodes: usize, seed: u64) -> Self {
        Self {
            env,
            channel,
            grid,
            episodes,
            seed,
            bootstrap_resamples: 200,
            base: None,
        }
    }

    /// Advantage-parameter range from the experiment design: the varied pair
    /// sweeps this interval, the other pair stays balanced.
    fn param_range(&self) -> (f64, f64) {
        match (self.env, self.channel) {
            (EnvChoice::Allocation, Channel::Reward) => (0.0, 1.0),
            (EnvChoice::Allocation, Channel::Transition) => (0.0, 0.5),
            (EnvChoice::Lending, Channel::Reward) => (0.0, 0.2),
            (EnvChoice::Lending, Channel::Transition) => (0.0, 0.5),
        }
    }

    fn base_params(&self) -> Result<EnvParams, HarnessError> {
        match &self.base {
            Some(params) => {
                if params.choice() != self.env {
                    return Err(HarnessError::Config(format!(
                        "config file is for {}, sweep is for {}",
                        params.choice().as_str(),
                        self.env.as_str()
                    )));
                }
                Ok(params.clone())
            }
            None => Ok(match self.env {
                EnvChoice::Allocation => EnvParams::Allocation(AllocationParams::default()),
                EnvChoice::Lending => EnvParams::Lending(LendingParams::default()),
            }),
        }
    }

    fn cell_params(&self, row: f64, col: f64) -> Result<EnvParams, HarnessError> {
        let pair = AdvantagePair::new(row, col);
        let mut params = self.base_params()?;
        match (&mut params, self.channel) {
            (EnvParams::Allocation(p), Channel::Reward) => p.alpha = pair,
            (EnvParams::Allocation(p), Channel::Transition) => p.beta = pair,
            (EnvParams::Lending(p), Channel::Reward) => p.alpha = pair,
            (EnvParams::Lending(p), Channel::Transition) => p.beta = pair,
        }
        Ok(params)
    }
}

/// One grid cell: the estimated direct effect (on reward, or the
/// largest-magnitude next-state component) with its bootstrap threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatCell {
    pub row_param: f64,
    pub col_param: f64,
    pub nde: f64,
    pub stderr: f64,
    /// 3x the bootstrap standard error of this cell's estimate.
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct HeatmapResult {
    pub cells: Vec<HeatCell>,
    pub grid: usize,
    pub env: EnvChoice,
    pub channel: Channel,
    /// Largest per-cell threshold; a conservative sweep-wide cutoff.
    pub tau_max: f64,
    pub axis: (String, String),
}

impl HeatmapResult {
    pub fn cell(&self, row: usize, col: usize) -> &HeatCell {
        &self.cells[row * self.grid + col]
    }
}

/// Runs the full grid; cells are independent and evaluated on a worker pool,
/// gathered by index so the result never depends on scheduling.
pub fn run_detect(config: &DetectConfig) -> Result<HeatmapResult, HarnessError> {
    if config.grid < 2 {
        return Err(HarnessError::Config("grid must be at least 2x2".into()));
    }
    if config.episodes == 0 {
        return Err(HarnessError::Config("episodes must be positive".into()));
    }
    let (lo, hi) = config.param_range();
    let values: Vec<f64> = (0..config.grid)
        .map(|i| lo + (hi - lo) * i as f64 / (config.grid - 1) as f64)
        .collect();
    let cells: Result<Vec<HeatCell>, HarnessError> = (0..config.grid * config.grid)
        .into_par_iter()
        .map(|idx| {
            let row = idx / config.grid;
            let col = idx % config.grid;
            evaluate_cell(config, values[row], values[col], idx as u64)
        })
        .collect();
    let cells = cells?;
    let tau_max = cells.iter().map(|c| c.tau).fold(0.0f64, f64::max);
    let param = match config.channel {
        Channel::Reward => "alpha",
        Channel::Transition => "beta",
    };
    Ok(HeatmapResult {
        cells,
        grid: config.grid,
        env: config.env,
        channel: config.channel,
        tau_max,
        axis: (format!("{param}1"), format!("{param}2")),
    })
}

fn evaluate_cell(
    config: &DetectConfig,
    row: f64,
    col: f64,
    idx: u64,
) -> Result<HeatCell, HarnessError> {
    let params = config.cell_params(row, col)?;
    let mut env = params.build();
    let menu_size = env.env_spec().menu.len();
    let mut policy = UniformRandomPolicy { menu_size };
    let data = rollout(
        env.as_mut(),
        &mut policy,
        stream_id(&[config.seed, 0x63656c6c, idx]),
        config.episodes,
    )?;
    let tables = ConditionalTables::fit(&data, &env.default_discretization())?;
    let boot = BootstrapConfig {
        resamples: config.bootstrap_resamples,
        seed: stream_id(&[config.seed, 0x626f6f74, idx]),
    };
    let (nde, stderr) = match config.channel {
        Channel::Reward => {
            let est = estimate_nde_reward(&tables, &boot)?;
            (est.scalar(), est.scalar_stderr())
        }
        Channel::Transition => {
            let est = estimate_nde_next_state(&tables, &boot)?;
            // report the largest-magnitude component with its own stderr
            let (d, _) = est
                .value
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("state has at least one dimension");
            (est.value[d], est.stderr[d])
        }
    };
    Ok(HeatCell {
        row_param: row,
        col_param: col,
        nde,
        stderr,
        tau: 3.0 * stderr,
    })
}

pub const HEATMAP_CSV_HEADER_REWARD: &str = "alpha1,alpha2,nde_r,stderr,tau";
pub const HEATMAP_CSV_HEADER_TRANSITION: &str = "beta1,beta2,nde_sprime,stderr,tau";

/// CSV with one row per cell; the first three columns feed the heatmap plot.
pub fn heatmap_csv(result: &HeatmapResult) -> String {
    let header = match result.channel {
        Channel::Reward => HEATMAP_CSV_HEADER_REWARD,
        Channel::Transition => HEATMAP_CSV_HEADER_TRANSITION,
    };
    let mut out = String::from(header);
    out.push('\n');
    for cell in &result.cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            cell.row_param, cell.col_param, cell.nde, cell.stderr, cell.tau
        ));
    }
    out
}

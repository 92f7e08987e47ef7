//! Reproducible experiment drivers behind the `fairdyn` CLI.
//!
//! Each driver is a pure function of its config and seed; the CLI layers file
//! output on top. Every run directory gets a manifest recording the exact
//! config, its content hash, the seeds, and the files written, so identical
//! manifests imply byte-identical CSVs.

mod analytic_driver;
mod detect;
mod manifest;
mod train;

pub use analytic_driver::{run_analytic, AnalyticConfig, AnalyticSweep};
pub use detect::{heatmap_csv, run_detect, Channel, DetectConfig, HeatCell, HeatmapResult};
pub use manifest::{content_hash, write_manifest, Manifest};
pub use train::{
    epochs_csv, mean_curve_csv, run_train, trace_csv, TrainConfig, TrainRun,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causal::CausalError;
use crate::envs::{AllocationEnv, AllocationParams, GroupEnv, LendingEnv, LendingParams};
use crate::model::ModelError;
use crate::planner::PlannerError;
use crate::plot::PlotError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvChoice {
    Allocation,
    Lending,
}

impl std::str::FromStr for EnvChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "allocation" | "allocation-v0" => Ok(EnvChoice::Allocation),
            "lending" | "lending-v0" => Ok(EnvChoice::Lending),
            other => Err(format!("unknown environment '{other}'")),
        }
    }
}

impl EnvChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvChoice::Allocation => "allocation",
            EnvChoice::Lending => "lending",
        }
    }
}

/// Concrete environment parameters for either simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "lowercase")]
pub enum EnvParams {
    Allocation(AllocationParams),
    Lending(LendingParams),
}

impl EnvParams {
    pub fn choice(&self) -> EnvChoice {
        match self {
            EnvParams::Allocation(_) => EnvChoice::Allocation,
            EnvParams::Lending(_) => EnvChoice::Lending,
        }
    }

    pub fn build(&self) -> Box<dyn GroupEnv> {
        match self {
            EnvParams::Allocation(p) => Box::new(AllocationEnv::new(p.clone())),
            EnvParams::Lending(p) => {
                p.validate().expect("lending parameters are valid");
                Box::new(LendingEnv::new(p.clone()))
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Causal(#[from] CausalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Serde(#[from] serde_json::Error),
    #[error("{0}")]
    Config(String),
}

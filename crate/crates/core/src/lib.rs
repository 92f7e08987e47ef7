//! Quantifying and reducing group inequality in sequential decision processes.
//!
//! The crate decomposes the gap in long-term well-being between two demographic
//! groups into natural direct and indirect effects, checks whether the
//! environment's own dynamics introduce inequality (dynamics fairness), and
//! plans with a learned ensemble model under several fairness modes.
//!
//! Module map:
//! - [`causal`] — plug-in effect estimators, gap decomposition, fairness
//!   verdicts, and a brute-force counterfactual oracle for small discrete SCMs.
//! - [`analytic`] — closed-form effects for a logistic threshold reward model.
//! - [`envs`] — the Allocation and Lending group-MDP simulators.
//! - [`model`] — bootstrapped ensembles of probabilistic MLP dynamics models.
//! - [`planner`] — cross-entropy-method planning (PETS, Fair-A, Fair-S,
//!   InsightFair) and the model-based learning loop.
//! - [`harness`] — reproducible experiment drivers feeding the `fairdyn` CLI.
//! - [`plot`] — a small standalone SVG chart writer.

pub mod analytic;
pub mod causal;
pub mod envs;
pub mod harness;
pub mod model;
pub mod planner;
pub mod plot;
pub mod rng;

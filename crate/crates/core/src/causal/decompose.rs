//! Discounted decomposition of the well-being gap.

use super::effects::{nde_reward_point, nie_reward_point, te_reward_point};
use super::tables::ConditionalTables;
use super::{CausalError, DiscretizationSpec, GroupLabel, TrajectoryDataset};

/// Per-step reward effects from tables fitted on that step's records alone.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEffects {
    pub step: usize,
    pub te_r: f64,
    pub nde_r: f64,
    pub nie_r: f64,
    pub n_records: usize,
}

/// The well-being gap split into per-step direct and indirect contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub per_step: Vec<StepEffects>,
    /// Discounted sum of per-step total effects over the horizon.
    pub te_g: f64,
    /// |te_g - sum_k gamma^k (nde_k - nie_k)|; zero up to rounding.
    pub residual: f64,
    /// gamma^H * r_max / (1 - gamma): worst-case mass beyond the truncation.
    pub truncation_bound: f64,
    pub horizon: usize,
    pub discount: f64,
}

/// Fits per-step tables and accumulates the discounted decomposition over
/// steps `0..horizon`. Every step must contain records for both groups.
pub fn decompose_gap(
    data: &TrajectoryDataset,
    spec: &DiscretizationSpec,
    horizon: usize,
) -> Result<DecompositionReport, CausalError> {
    if data.records.is_empty() {
        return Err(CausalError::EmptyDataset);
    }
    let gamma = data.discount;
    let mut per_step = Vec::with_capacity(horizon);
    let mut te_g = 0.0;
    let mut direct_minus_indirect = 0.0;
    let mut r_max = 0.0f64;
    for rec in &data.records {
        r_max = r_max.max(rec.reward.abs());
    }
    for k in 0..horizon {
        let records: Vec<_> = data
            .records
            .iter()
            .filter(|r| r.step == k)
            .cloned()
            .collect();
        for g in GroupLabel::BOTH {
            if !records.iter().any(|r| r.group == g) {
                return Err(CausalError::MissingStep { step: k, group: g });
            }
        }
        let n_records = records.len();
        let step_data =
            TrajectoryDataset::new(records, data.state_dim, data.action_dim, data.discount)?;
        let tables = ConditionalTables::fit(&step_data, spec)?;
        let te_r = te_reward_point(&tables);
        let nde_r = nde_reward_point(&tables);
        let nie_r = nie_reward_point(&tables);
        let w = gamma.powi(k as i32);
        te_g += w * te_r;
        direct_minus_indirect += w * (nde_r - nie_r);
        per_step.push(StepEffects {
            step: k,
            te_r,
            nde_r,
            nie_r,
            n_records,
        });
    }
    Ok(DecompositionReport {
        per_step,
        te_g,
        residual: (te_g - direct_minus_indirect).abs(),
        truncation_bound: gamma.powi(horizon as i32) * r_max / (1.0 - gamma),
        horizon,
        discount: gamma,
    })
}

//! Dynamics-fairness decision from estimated natural direct effects.

use super::effects::{estimate_nde_next_state, estimate_nde_reward, BootstrapConfig};
use super::tables::ConditionalTables;
use super::{CausalError, EffectEstimate};

/// Verdict on whether the environment's own mechanisms introduce inequality.
///
/// The dynamics violate fairness when the direct effect on reward or on any
/// next-state component is distinguishable from zero. With an explicit
/// `threshold` every component is compared against it; with a calibrated
/// threshold each quantity is compared against 3x its own bootstrap standard
/// error and `threshold` records the largest of those cutoffs.
#[derive(Debug, Clone)]
pub struct FairnessVerdict {
    pub nde_r: EffectEstimate,
    pub nde_sprime: EffectEstimate,
    pub threshold: f64,
    pub violated: bool,
}

/// Multiple of the bootstrap standard error used for calibrated thresholds.
pub(crate) const CALIBRATION_MULTIPLE: f64 = 3.0;

pub fn check_dynamics_fairness(
    tables: &ConditionalTables,
    threshold: Option<f64>,
    boot: &BootstrapConfig,
) -> Result<FairnessVerdict, CausalError> {
    let nde_r = estimate_nde_reward(tables, boot)?;
    let nde_sprime = estimate_nde_next_state(tables, boot)?;
    let (violated, threshold) = match threshold {
        Some(tau) => {
            assert!(tau >= 0.0, "threshold must be nonnegative");
            let hit = nde_r.scalar().abs() > tau
                || nde_sprime.value.iter().any(|v| v.abs() > tau);
            (hit, tau)
        }
        None => {
            let tau_r = CALIBRATION_MULTIPLE * nde_r.scalar_stderr();
            let mut hit = nde_r.scalar().abs() > tau_r;
            let mut tau_max = tau_r;
            for (v, se) in nde_sprime.value.iter().zip(&nde_sprime.stderr) {
                let tau_d = CALIBRATION_MULTIPLE * se;
                hit |= v.abs() > tau_d;
                tau_max = tau_max.max(tau_d);
            }
            (hit, tau_max)
        }
    };
    Ok(FairnessVerdict {
        nde_r,
        nde_sprime,
        threshold,
        violated,
    })
}

//! Closed-form effect sweeps for the logistic reward model.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::analytic::{sweep_w0, LogisticModelParams, SweepRow};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyticConfig {
    pub w0_range: (f64, f64),
    pub points: usize,
    /// Shared slope settings; one sweep per entry.
    pub weights: Vec<f64>,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        Self {
            w0_range: (-2.5, 2.5),
            points: 101,
            weights: vec![0.1, 3.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalyticSweep {
    /// Slope setting shared by w1 = w2 = w3.
    pub weight: f64,
    pub rows: Vec<SweepRow>,
}

impl AnalyticSweep {
    pub fn file_stem(&self) -> String {
        format!("analytic_w{}", self.weight)
    }
}

/// One sweep per configured weight setting.
pub fn run_analytic(config: &AnalyticConfig) -> Result<Vec<AnalyticSweep>, HarnessError> {
    if config.points < 2 {
        return Err(HarnessError::Config(
            "analytic sweep needs at least two points".into(),
        ));
    }
    if !(config.w0_range.0 < config.w0_range.1) {
        return Err(HarnessError::Config("empty w0 range".into()));
    }
    Ok(config
        .weights
        .iter()
        .map(|&w| AnalyticSweep {
            weight: w,
            rows: sweep_w0(
                &LogisticModelParams::equal_weights(0.0, w),
                config.w0_range.0,
                config.w0_range.1,
                config.points,
            ),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_run_produces_two_101_point_sweeps() {
        let sweeps = run_analytic(&AnalyticConfig::default()).unwrap();
        assert_eq!(sweeps.len(), 2);
        let total_rows: usize = sweeps.iter().map(|s| s.rows.len()).sum();
        assert_eq!(total_rows, 202);
        for sweep in &sweeps {
            for row in &sweep.rows {
                assert!((row.te - (row.nde + row.neg_nie)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn degenerate_configs_are_rejected() {
        let bad = AnalyticConfig {
            points: 1,
            ..AnalyticConfig::default()
        };
        assert!(run_analytic(&bad).is_err());
    }
}

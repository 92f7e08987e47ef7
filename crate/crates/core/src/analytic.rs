//! Closed-form effects for the logistic threshold reward model.
//!
//! The reward is R = 1 when w0 + w1 z + w2 s + w3 a + U >= 0 with standard
//! logistic noise U, so P(R = 1 | z, s, a) = L(w0 + w1 z + w2 s + w3 a).
//! With the mediators pinned near 0 under z0 and near 1 under z1 the effects
//! collapse to differences of the logistic function at four points, dropping
//! the vanishing background-noise terms.

use serde::{Deserialize, Serialize};

/// Coefficients of the threshold model plus the mediator noise scales,
/// treated as negligible in the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticModelParams {
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub sigma_s: f64,
    pub sigma_a: f64,
}

impl LogisticModelParams {
    /// Equal slope weights w1 = w2 = w3 = `w` at intercept `w0`.
    pub fn equal_weights(w0: f64, w: f64) -> Self {
        Self {
            w0,
            w1: w,
            w2: w,
            w3: w,
            sigma_s: 0.0,
            sigma_a: 0.0,
        }
    }
}

/// The three effects of the group attribute on the reward probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticEffects {
    pub te: f64,
    pub nde: f64,
    pub nie: f64,
}

/// One grid point of a `w0` sweep; `neg_nie` is plotted so the two curves
/// stack to the total effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub w0: f64,
    pub te: f64,
    pub nde: f64,
    pub neg_nie: f64,
}

/// The logistic function 1 / (1 + e^{-x}).
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Exact leading-order effects:
/// nde = L(w0+w1) - L(w0), nie = L(w0+w1) - L(w0+w1+w2+w3), te = nde - nie.
pub fn analytic_effects(p: &LogisticModelParams) -> AnalyticEffects {
    let nde = logistic(p.w0 + p.w1) - logistic(p.w0);
    let nie = logistic(p.w0 + p.w1) - logistic(p.w0 + p.w1 + p.w2 + p.w3);
    AnalyticEffects {
        te: nde - nie,
        nde,
        nie,
    }
}

/// Evaluates the effects on an evenly spaced `w0` grid.
pub fn sweep_w0(p: &LogisticModelParams, lo: f64, hi: f64, n_points: usize) -> Vec<SweepRow> {
    assert!(lo < hi, "sweep range must be nonempty");
    assert!(n_points >= 2, "sweep needs at least two points");
    (0..n_points)
        .map(|i| {
            let w0 = lo + (hi - lo) * i as f64 / (n_points - 1) as f64;
            let fx = analytic_effects(&LogisticModelParams { w0, ..*p });
            SweepRow {
                w0,
                te: fx.te,
                nde: fx.nde,
                neg_nie: -fx.nie,
            }
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "w0,te,nde,neg_nie";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.w0, r.te, r.nde, r.neg_nie));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_midpoint() {
        assert_eq!(logistic(0.0), 0.5);
    }

    #[test]
    fn logistic_symmetry() {
        for x in [0.1, 1.7, -3.4, 12.0] {
            assert!((logistic(x) + logistic(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn logistic_point_value() {
        assert!((logistic(0.3) - 0.574443).abs() < 1e-6);
    }

    #[test]
    fn effects_at_the_reference_point() {
        let fx = analytic_effects(&LogisticModelParams::equal_weights(0.0, 0.1));
        assert!((fx.nde - 0.024979).abs() < 1e-6);
        assert!((fx.nie - (-0.049464)).abs() < 1e-6);
        assert!((fx.te - 0.074443).abs() < 1e-6);
    }

    #[test]
    fn no_direct_path_means_zero_nde() {
        let fx = analytic_effects(&LogisticModelParams {
            w0: 0.4,
            w1: 0.0,
            w2: 0.3,
            w3: 0.2,
            sigma_s: 0.0,
            sigma_a: 0.0,
        });
        assert_eq!(fx.nde, 0.0);
    }

    #[test]
    fn no_mediated_path_means_zero_nie() {
        let fx = analytic_effects(&LogisticModelParams {
            w0: 0.4,
            w1: 0.3,
            w2: 0.0,
            w3: 0.0,
            sigma_s: 0.0,
            sigma_a: 0.0,
        });
        assert_eq!(fx.nie, 0.0);
    }

    #[test]
    fn sweep_rows_satisfy_the_decomposition_identity() {
        let rows = sweep_w0(&LogisticModelParams::equal_weights(0.0, 0.1), -2.5, 2.5, 101);
        assert_eq!(rows.len(), 101);
        for r in &rows {
            assert!((r.te - (r.nde + r.neg_nie)).abs() < 1e-15);
        }
    }

    #[test]
    fn weak_weights_are_indirect_dominated() {
        let rows = sweep_w0(&LogisticModelParams::equal_weights(0.0, 0.1), -2.5, 2.5, 101);
        for r in &rows {
            assert!(r.neg_nie.abs() > r.nde.abs());
        }
    }

    #[test]
    fn strong_weights_are_direct_dominated_at_the_peak() {
        let rows = sweep_w0(&LogisticModelParams::equal_weights(0.0, 3.0), -2.5, 2.5, 101);
        let max_nde = rows.iter().map(|r| r.nde.abs()).fold(0.0, f64::max);
        let max_nie = rows.iter().map(|r| r.neg_nie.abs()).fold(0.0, f64::max);
        assert!(max_nde > max_nie);
    }

    #[test]
    fn effects_vanish_with_the_slopes() {
        for scale in [1e-3, 1e-6] {
            let fx = analytic_effects(&LogisticModelParams::equal_weights(0.7, scale));
            assert!(fx.te.abs() < 2.0 * scale);
            assert!(fx.nde.abs() < scale);
            assert!(fx.nie.abs() < 2.0 * scale);
        }
    }
}

//! Estimator invariants over randomized datasets and small SCMs.

use fairdyn::causal::{
    decompose_gap, estimate_reward_effects, nde_reward_point, nie_reward_point, oracle_effects,
    random_scm, sample_scm_dataset, scm_discretization, te_reward_point, BootstrapConfig,
    ConditionalTables, DiscretizationSpec, GroupLabel, TransitionRecord, TrajectoryDataset,
};
use proptest::prelude::*;

fn record(group: u8, s: f64, a: f64, r: f64, s2: f64, step: usize) -> TransitionRecord {
    TransitionRecord {
        group: GroupLabel::try_from(group).unwrap(),
        state: vec![s],
        action: vec![a],
        reward: r,
        next_state: vec![s2],
        step,
    }
}

fn spec() -> DiscretizationSpec {
    DiscretizationSpec::new(
        vec![3],
        vec![3],
        vec![(-1.0, 1.0), (-0.5, 2.5)],
        1.0,
    )
    .unwrap()
}

prop_compose! {
    fn arb_records()(
        body in prop::collection::vec(
            (0u8..2, -1.2f64..1.2, 0f64..3.0, -1.0f64..1.0, -1.2f64..1.2, 0usize..3),
            20..150,
        )
    ) -> Vec<TransitionRecord> {
        let mut records: Vec<TransitionRecord> = body
            .into_iter()
            .map(|(g, s, a, r, s2, t)| record(g, s, a.floor(), r, s2, t))
            .collect();
        // every step needs both groups for the decomposition invariant
        for step in 0..3 {
            records.push(record(0, 0.0, 0.0, 0.1, 0.0, step));
            records.push(record(1, 0.0, 0.0, 0.2, 0.0, step));
        }
        records
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plug_in_identity_te_equals_nde_minus_nie(records in arb_records()) {
        let data = TrajectoryDataset::new(records, 1, 1, 0.9).unwrap();
        let tables = ConditionalTables::fit(&data, &spec()).unwrap();
        let te = te_reward_point(&tables);
        let nde = nde_reward_point(&tables);
        let nie = nie_reward_point(&tables);
        prop_assert!((te - (nde - nie)).abs() < 1e-9, "te {te}, nde {nde}, nie {nie}");
    }

    #[test]
    fn probabilities_sum_to_one_per_group(records in arb_records()) {
        let data = TrajectoryDataset::new(records, 1, 1, 0.9).unwrap();
        let tables = ConditionalTables::fit(&data, &spec()).unwrap();
        for g in GroupLabel::BOTH {
            prop_assert!((tables.probability_total(g) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn estimates_ignore_record_order(records in arb_records()) {
        let data = TrajectoryDataset::new(records.clone(), 1, 1, 0.9).unwrap();
        let tables = ConditionalTables::fit(&data, &spec()).unwrap();
        let mut reversed = records;
        reversed.reverse();
        let data_rev = TrajectoryDataset::new(reversed, 1, 1, 0.9).unwrap();
        let tables_rev = ConditionalTables::fit(&data_rev, &spec()).unwrap();
        prop_assert!((te_reward_point(&tables) - te_reward_point(&tables_rev)).abs() < 1e-12);
        prop_assert!((nde_reward_point(&tables) - nde_reward_point(&tables_rev)).abs() < 1e-12);
        prop_assert!((nie_reward_point(&tables) - nie_reward_point(&tables_rev)).abs() < 1e-12);
    }

    #[test]
    fn relabeling_groups_negates_the_total_effect(records in arb_records()) {
        let data = TrajectoryDataset::new(records.clone(), 1, 1, 0.9).unwrap();
        let tables = ConditionalTables::fit(&data, &spec()).unwrap();
        let swapped: Vec<TransitionRecord> = records
            .into_iter()
            .map(|mut r| {
                r.group = r.group.other();
                r
            })
            .collect();
        let data_swapped = TrajectoryDataset::new(swapped, 1, 1, 0.9).unwrap();
        let tables_swapped = ConditionalTables::fit(&data_swapped, &spec()).unwrap();
        let te = te_reward_point(&tables);
        let te_swapped = te_reward_point(&tables_swapped);
        prop_assert!((te + te_swapped).abs() < 1e-15);
        // the swapped decomposition still satisfies its own identity
        let nde = nde_reward_point(&tables_swapped);
        let nie = nie_reward_point(&tables_swapped);
        prop_assert!((te_swapped - (nde - nie)).abs() < 1e-9);
    }

    #[test]
    fn decomposition_residual_is_negligible(records in arb_records()) {
        let data = TrajectoryDataset::new(records, 1, 1, 0.9).unwrap();
        let report = decompose_gap(&data, &spec(), 3).unwrap();
        prop_assert!(report.residual <= 1e-9);
    }
}

/// Plug-in estimates on sampled data agree with exhaustive counterfactual
/// enumeration within bootstrap uncertainty.
#[test]
fn plug_in_matches_the_oracle_on_small_scms() {
    for seed in [3u64, 11, 27] {
        let scm = random_scm(seed, 16);
        let oracle = oracle_effects(&scm).unwrap();
        let data = sample_scm_dataset(&scm, 20_000, seed + 1000).unwrap();
        let tables = ConditionalTables::fit(&data, &scm_discretization(&scm)).unwrap();
        let effects =
            estimate_reward_effects(&tables, &BootstrapConfig::with_seed(seed + 2000)).unwrap();
        for (name, est, truth) in [
            ("te", &effects.te, oracle.te),
            ("nde", &effects.nde, oracle.nde),
            ("nie", &effects.nie, oracle.nie),
        ] {
            let err = (est.scalar() - truth).abs();
            let limit = 3.0 * est.scalar_stderr();
            assert!(
                err < limit,
                "scm {seed}: {name} off by {err:.5} vs 3se {limit:.5}"
            );
        }
    }
}

/// The oracle itself satisfies the decomposition identity on every draw.
#[test]
fn oracle_identity_holds_for_many_scms() {
    for seed in 0..40 {
        let fx = oracle_effects(&random_scm(seed, 16)).unwrap();
        assert!((fx.te - (fx.nde - fx.nie)).abs() < 1e-14);
    }
}

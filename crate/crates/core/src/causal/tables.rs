//! Conditional tables identified from data.
//!
//! For each group z and each occupied (state, action) grid cell the tables
//! hold the sample means E[R | z, s, a] and E[S' | z, s, a] together with the
//! Laplace-smoothed cell probability P(s, a | z). Cells never observed under
//! either group carry no reward information and are excluded from every
//! plug-in sum; their total smoothed mass is tracked separately so the
//! per-group probabilities still account for the whole grid.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{CausalError, DiscretizationSpec, GroupLabel, TrajectoryDataset};

/// Records reduced to their grid cell plus the outcome columns, so bootstrap
/// resamples can refit tables without touching the raw dataset again.
#[derive(Debug)]
pub(crate) struct DiscretizedDataset {
    pub flat: Vec<u64>,
    pub reward: Vec<f64>,
    /// Row-major `n x state_dim` next states.
    pub next_state: Vec<f64>,
    pub state_dim: usize,
    /// Record indices per group; stratified resampling draws within these.
    pub group_indices: [Vec<u32>; 2],
}

impl DiscretizedDataset {
    fn from_dataset(data: &TrajectoryDataset, spec: &DiscretizationSpec) -> Self {
        let n = data.records.len();
        let mut flat = Vec::with_capacity(n);
        let mut reward = Vec::with_capacity(n);
        let mut next_state = Vec::with_capacity(n * data.state_dim);
        let mut group_indices = [Vec::new(), Vec::new()];
        for (i, rec) in data.records.iter().enumerate() {
            flat.push(spec.flat_bin(&rec.state, &rec.action));
            reward.push(rec.reward);
            next_state.extend_from_slice(&rec.next_state);
            group_indices[rec.group.index()].push(i as u32);
        }
        Self {
            flat,
            reward,
            next_state,
            state_dim: data.state_dim,
            group_indices,
        }
    }

    pub(crate) fn next_state_of(&self, record: usize) -> &[f64] {
        let d = self.state_dim;
        &self.next_state[record * d..(record + 1) * d]
    }
}

/// Per-cell sufficient statistics for one group.
#[derive(Debug, Clone)]
struct CellAccum {
    count: u32,
    reward_sum: f64,
    next_sum: Vec<f64>,
}

impl CellAccum {
    fn new(state_dim: usize) -> Self {
        Self {
            count: 0,
            reward_sum: 0.0,
            next_sum: vec![0.0; state_dim],
        }
    }
}

/// One occupied grid cell with finalized per-group statistics.
#[derive(Debug, Clone)]
pub(crate) struct OccupiedCell {
    pub count: [u32; 2],
    /// Smoothed P(s, a | z); sums with `excluded_mass` to 1 per group.
    pub prob: [f64; 2],
    /// E[R | z, s, a]; the group's marginal mean when it never visits the cell.
    pub reward_mean: [f64; 2],
    /// E[S' | z, s, a] componentwise, imputed like `reward_mean`.
    pub next_mean: [Vec<f64>; 2],
}

/// Fitted conditional tables plus the discretized data they came from.
#[derive(Debug)]
pub struct ConditionalTables {
    pub(crate) spec: DiscretizationSpec,
    pub(crate) state_dim: usize,
    pub(crate) cells: Vec<OccupiedCell>,
    pub(crate) group_n: [usize; 2],
    /// Smoothed probability mass sitting on never-observed cells, per group.
    pub(crate) excluded_mass: [f64; 2],
    pub(crate) data: Arc<DiscretizedDataset>,
}

impl ConditionalTables {
    /// Fits reward/next-state means and smoothed cell probabilities per group.
    pub fn fit(data: &TrajectoryDataset, spec: &DiscretizationSpec) -> Result<Self, CausalError> {
        if data.records.is_empty() {
            return Err(CausalError::EmptyDataset);
        }
        let dims = data.state_dim + data.action_dim;
        if spec.bins_per_dim().len() != dims {
            return Err(CausalError::DegenerateSpec(format!(
                "spec covers {} dimensions, dataset has {dims}",
                spec.bins_per_dim().len()
            )));
        }
        let disc = Arc::new(DiscretizedDataset::from_dataset(data, spec));
        for g in GroupLabel::BOTH {
            if disc.group_indices[g.index()].is_empty() {
                return Err(CausalError::EmptyGroup(g));
            }
        }
        let all: [Vec<u32>; 2] = [
            disc.group_indices[0].clone(),
            disc.group_indices[1].clone(),
        ];
        Ok(Self::fit_from_indices(disc, spec.clone(), data.state_dim, &all))
    }

    /// Refits tables over a chosen multiset of record indices per group.
    /// Shared by the initial fit and by bootstrap resamples. Small grids
    /// accumulate into dense arrays; larger ones fall back to an ordered map.
    pub(crate) fn fit_from_indices(
        data: Arc<DiscretizedDataset>,
        spec: DiscretizationSpec,
        state_dim: usize,
        indices: &[Vec<u32>; 2],
    ) -> Self {
        const DENSE_GRID_LIMIT: f64 = 65536.0;
        let mut marginal_r = [0.0f64; 2];
        let mut marginal_next = [vec![0.0f64; state_dim], vec![0.0f64; state_dim]];
        let grid = spec.grid_size();
        let cells_map: BTreeMap<u64, [CellAccum; 2]> = if grid <= DENSE_GRID_LIMIT {
            let b = grid as usize;
            let mut counts = vec![0u32; 2 * b];
            let mut r_sums = vec![0.0f64; 2 * b];
            let mut next_sums = vec![0.0f64; 2 * b * state_dim];
            for g in 0..2 {
                for &i in &indices[g] {
                    let i = i as usize;
                    let cell = g * b + data.flat[i] as usize;
                    counts[cell] += 1;
                    r_sums[cell] += data.reward[i];
                    marginal_r[g] += data.reward[i];
                    for (d, &v) in data.next_state_of(i).iter().enumerate() {
                        next_sums[cell * state_dim + d] += v;
                        marginal_next[g][d] += v;
                    }
                }
            }
            (0..b)
                .filter(|&flat| counts[flat] + counts[b + flat] > 0)
                .map(|flat| {
                    let mut pair = [CellAccum::new(state_dim), CellAccum::new(state_dim)];
                    for g in 0..2 {
                        let cell = g * b + flat;
                        pair[g].count = counts[cell];
                        pair[g].reward_sum = r_sums[cell];
                        pair[g]
                            .next_sum
                            .copy_from_slice(&next_sums[cell * state_dim..(cell + 1) * state_dim]);
                    }
                    (flat as u64, pair)
                })
                .collect()
        } else {
            let mut map: BTreeMap<u64, [CellAccum; 2]> = BTreeMap::new();
            for g in 0..2 {
                for &i in &indices[g] {
                    let i = i as usize;
                    let entry = map
                        .entry(data.flat[i])
                        .or_insert_with(|| [CellAccum::new(state_dim), CellAccum::new(state_dim)]);
                    entry[g].count += 1;
                    entry[g].reward_sum += data.reward[i];
                    marginal_r[g] += data.reward[i];
                    for (d, &v) in data.next_state_of(i).iter().enumerate() {
                        entry[g].next_sum[d] += v;
                        marginal_next[g][d] += v;
                    }
                }
            }
            map
        };
        let group_n = [indices[0].len(), indices[1].len()];
        for g in 0..2 {
            let n = group_n[g].max(1) as f64;
            marginal_r[g] /= n;
            for v in marginal_next[g].iter_mut() {
                *v /= n;
            }
        }

        let alpha = spec.laplace_alpha;
        let grid = spec.grid_size();
        let denom = [
            group_n[0] as f64 + alpha * grid,
            group_n[1] as f64 + alpha * grid,
        ];
        let occupied = cells_map.len() as f64;
        let excluded_mass = [
            alpha * (grid - occupied) / denom[0],
            alpha * (grid - occupied) / denom[1],
        ];

        let cells = cells_map
            .into_iter()
            .map(|(_flat, accum)| {
                let mut cell = OccupiedCell {
                    count: [accum[0].count, accum[1].count],
                    prob: [0.0; 2],
                    reward_mean: [0.0; 2],
                    next_mean: [vec![0.0; state_dim], vec![0.0; state_dim]],
                };
                for g in 0..2 {
                    let c = accum[g].count as f64;
                    cell.prob[g] = (c + alpha) / denom[g];
                    if accum[g].count > 0 {
                        cell.reward_mean[g] = accum[g].reward_sum / c;
                        for d in 0..state_dim {
                            cell.next_mean[g][d] = accum[g].next_sum[d] / c;
                        }
                    } else {
                        cell.reward_mean[g] = marginal_r[g];
                        cell.next_mean[g].copy_from_slice(&marginal_next[g]);
                    }
                }
                cell
            })
            .collect();

        Self {
            spec,
            state_dim,
            cells,
            group_n,
            excluded_mass,
            data,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn records_per_group(&self) -> [usize; 2] {
        self.group_n
    }

    pub fn n_total(&self) -> usize {
        self.group_n[0] + self.group_n[1]
    }

    /// Number of grid cells observed under at least one group.
    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    /// Per-cell record counts for one group, in grid order.
    pub fn cell_counts(&self, group: GroupLabel) -> Vec<u32> {
        self.cells.iter().map(|c| c.count[group.index()]).collect()
    }

    /// Total smoothed probability for a group: occupied cells plus the mass
    /// held by never-observed cells. Equals 1 up to rounding.
    pub fn probability_total(&self, group: GroupLabel) -> f64 {
        let g = group.index();
        self.cells.iter().map(|c| c.prob[g]).sum::<f64>() + self.excluded_mass[g]
    }

    pub(crate) fn spec(&self) -> &DiscretizationSpec {
        &self.spec
    }

    pub(crate) fn discretized(&self) -> &Arc<DiscretizedDataset> {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::TransitionRecord;

    fn rec(group: GroupLabel, s: f64, a: f64, r: f64) -> TransitionRecord {
        TransitionRecord {
            group,
            state: vec![s],
            action: vec![a],
            reward: r,
            next_state: vec![s],
            step: 0,
        }
    }

    fn both_groups(mut records: Vec<TransitionRecord>) -> Vec<TransitionRecord> {
        // tables require both groups; add an inert z1 record in its own cell
        records.push(rec(GroupLabel::Z1, 0.0, 0.0, 0.0));
        records
    }

    #[test]
    fn single_record_single_bin_is_a_point_mass() {
        let records = vec![
            rec(GroupLabel::Z0, 0.0, 0.0, 1.0),
            rec(GroupLabel::Z1, 0.0, 0.0, 0.5),
        ];
        let data = TrajectoryDataset::new(records, 1, 1, 0.9).unwrap();
        let spec =
            DiscretizationSpec::new(vec![1], vec![1], vec![(-1.0, 1.0), (-1.0, 1.0)], 0.0).unwrap();
        let tables = ConditionalTables::fit(&data, &spec).unwrap();
        assert_eq!(tables.occupied_cells(), 1);
        assert_eq!(tables.cells[0].prob[0], 1.0);
        assert_eq!(tables.cells[0].reward_mean[0], 1.0);
    }

    #[test]
    fn reward_mean_is_the_sample_mean() {
        let records = both_groups(vec![
            rec(GroupLabel::Z0, 0.0, 0.0, 0.0),
            rec(GroupLabel::Z0, 0.0, 0.0, 1.0),
        ]);
        let data = TrajectoryDataset::new(records, 1, 1, 0.9).unwrap();
        let spec =
            DiscretizationSpec::new(vec![1], vec![1], vec![(-1.0, 1.0), (-1.0, 1.0)], 0.0).unwrap();
        let tables = ConditionalTables::fit(&data, &spec).unwrap();
        assert_eq!(tables.cells[0].reward_mean[0], 0.5);
    }

    #[test]
    fn laplace_smoothing_over_the_full_grid() {
        // 3 state bins, counts (2, 1, 1) for z0, alpha = 1 -> (3/7, 2/7, 2/7)
        let records = vec![
            rec(GroupLabel::Z0, 0.1, 0.0, 0.0),
            rec(GroupLabel::Z0, 0.2, 0.0, 0.0),
            rec(GroupLabel::Z0, 1.5, 0.0, 0.0),
            rec(GroupLabel::Z0, 2.5, 0.0, 0.0),
            rec(GroupLabel::Z1, 0.1, 0.0, 0.0),
            rec(GroupLabel::Z1, 1.5, 0.0, 0.0),
            rec(GroupLabel::Z1, 2.5, 0.0, 0.0),
        ];
        let data = TrajectoryDataset::new(records, 1, 1, 0.9).unwrap();
        let spec =
            DiscretizationSpec::new(vec![3], vec![1], vec![(0.0, 3.0), (-1.0, 1.0)], 1.0).unwrap();
        let tables = ConditionalTables::fit(&data, &spec).unwrap();
        let probs: Vec<f64> = tables.cells.iter().map(|c| c.prob[0]).collect();
        assert_eq!(probs, vec![3.0 / 7.0, 2.0 / 7.0, 2.0 / 7.0]);
        assert_eq!(tables.cell_counts(GroupLabel::Z0), vec![2, 1, 1]);
        assert!((tables.probability_total(GroupLabel::Z0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_group_is_rejected() {
        let records = vec![rec(GroupLabel::Z0, 0.0, 0.0, 1.0)];
        let data = TrajectoryDataset::new(records, 1, 1, 0.9).unwrap();
        let spec =
            DiscretizationSpec::new(vec![1], vec![1], vec![(-1.0, 1.0), (-1.0, 1.0)], 1.0).unwrap();
        match ConditionalTables::fit(&data, &spec) {
            Err(CausalError::EmptyGroup(GroupLabel::Z1)) => {}
            other => panic!("expected EmptyGroup(Z1), got {other:?}"),
        }
    }

    #[test]
    fn zero_width_dimension_is_rejected() {
        let spec = DiscretizationSpec::new(vec![1], vec![1], vec![(1.0, 1.0), (-1.0, 1.0)], 1.0);
        assert!(matches!(spec, Err(CausalError::DegenerateSpec(_))));
    }

    #[test]
    fn out_of_bounds_values_clamp_to_edge_bins() {
        let spec =
            DiscretizationSpec::new(vec![4], vec![1], vec![(0.0, 4.0), (-1.0, 1.0)], 1.0).unwrap();
        assert_eq!(spec.bin_of(0, -10.0), 0);
        assert_eq!(spec.bin_of(0, 99.0), 3);
        assert_eq!(spec.bin_of(0, 2.5), 2);
    }
}

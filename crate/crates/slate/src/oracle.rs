//! Exact brute-force solvers used to certify the approximation algorithms on
//! small inputs.
//!
//! Every solver enumerates subsets, so all of them take a cap on the number
//! of enumerated points (default 22, about 4M subsets). Ties between equal
//! optima are broken toward the lexicographically smallest subset so
//! regression tests are deterministic.

use crate::model::{discount, social_welfare, Instance, Matching};
use crate::nnlp::{GpdsConstraint, GpdsInstance, Selection};
use crate::proddist::Graph;
use crate::ptas::Disk;
use thiserror::Error;

/// Default enumeration cap.
pub const DEFAULT_CAP: usize = 22;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance needs {size} enumerated points, above the cap of {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("model error: {0}")]
    Model(#[from] crate::model::ModelError),
}

#[derive(Clone, Debug)]
pub struct OracleResult<T> {
    pub best: T,
    pub value: f64,
    /// Number of candidate subsets enumerated.
    pub explored: u64,
}

fn subset_list(mask: u64) -> Vec<usize> {
    (0..64).filter(|b| mask >> b & 1 == 1).collect()
}

/// Minimum-cost assignment matching every row to a distinct column
/// (rows <= columns). Returns the total cost and the column of each row.
fn min_cost_assignment(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = cost.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let m = cost[0].len();
    assert!(n <= m, "assignment needs rows <= columns");
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1]; // 1-based row matched to each column, 0 = free
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut cols = vec![usize::MAX; n];
    let mut total = 0.0;
    for j in 1..=m {
        if row_of[j] != 0 {
            cols[row_of[j] - 1] = j - 1;
            total += cost[row_of[j] - 1][j - 1];
        }
    }
    (total, cols)
}

/// Maximum-weight bipartite matching on a rectangular table, leaving rows or
/// columns unmatched whenever that is better. Returns the value and the
/// matched pairs.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> (f64, Vec<(usize, usize)>) {
    let n = weights.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let m = weights[0].len();
    if m == 0 {
        return (0.0, Vec::new());
    }
    // One private zero-cost dummy column per row makes the matching partial.
    let cost: Vec<Vec<f64>> = weights
        .iter()
        .map(|row| {
            let mut c: Vec<f64> = row.iter().map(|&w| -w).collect();
            c.extend(std::iter::repeat(0.0).take(n));
            c
        })
        .collect();
    let (_, cols) = min_cost_assignment(&cost);
    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (i, &j) in cols.iter().enumerate() {
        if j < m && weights[i][j] > 0.0 {
            pairs.push((i, j));
            total += weights[i][j];
        }
    }
    (total, pairs)
}

/// For a fixed occupied set the discounts are constants, so the best matching
/// that fills exactly those slots is a max-weight assignment. Advertisers are
/// zero-padded when the set is larger than `n`; pad assignments are dropped
/// from the reported matching.
fn best_for_occupied(instance: &Instance, slots: &[usize]) -> (f64, Matching) {
    let n = instance.n();
    let s = slots.len();
    let deltas: Vec<f64> = slots
        .iter()
        .map(|&j| {
            discount(instance.model(), j, slots, instance.metric())
                .expect("occupied set contains its own slots")
        })
        .collect();
    let cols = n.max(s);
    let cost: Vec<Vec<f64>> = slots
        .iter()
        .zip(&deltas)
        .map(|(&j, &d)| {
            (0..cols)
                .map(|i| if i < n { -(instance.value(i, j) * d) } else { 0.0 })
                .collect()
        })
        .collect();
    let (neg, assigned) = min_cost_assignment(&cost);
    let pairs: Vec<(usize, usize)> = assigned
        .iter()
        .enumerate()
        .filter(|&(_, &i)| i < n)
        .map(|(row, &i)| (i, slots[row]))
        .collect();
    (-neg, Matching::new(pairs).expect("assignment yields distinct rows and columns"))
}

/// Exact welfare maximizer: enumerates every occupied subset and solves the
/// inner assignment for each.
pub fn optimal_allocation(instance: &Instance) -> Result<OracleResult<Matching>, OracleError> {
    optimal_allocation_capped(instance, DEFAULT_CAP)
}

pub fn optimal_allocation_capped(
    instance: &Instance,
    cap: usize,
) -> Result<OracleResult<Matching>, OracleError> {
    let m = instance.m();
    if m > cap {
        return Err(OracleError::CapExceeded { size: m, cap });
    }
    let mut best_value = 0.0;
    let mut best_slots: Vec<usize> = Vec::new();
    let mut best_matching = Matching::empty();
    let mut explored = 0u64;
    for mask in 0u64..(1u64 << m) {
        explored += 1;
        if mask == 0 {
            continue;
        }
        let slots = subset_list(mask);
        let (value, matching) = best_for_occupied(instance, &slots);
        if value > best_value || (value == best_value && !best_slots.is_empty() && slots < best_slots)
        {
            best_value = value;
            best_slots = slots;
            best_matching = matching;
        }
    }
    // The winner's padded value always matches the realized welfare.
    let value = social_welfare(&best_matching, instance)?;
    debug_assert!((value - best_value).abs() <= 1e-9 * (1.0 + best_value.abs()));
    Ok(OracleResult { best: best_matching, value, explored })
}

/// Exact optimum of a grouped pseudo-disk selection instance under either
/// coverage constraint.
pub fn optimal_gpds(
    gpds: &GpdsInstance,
    constraint: GpdsConstraint,
    cap: usize,
) -> Result<OracleResult<Selection>, OracleError> {
    let n = gpds.disks.len();
    if n > cap.min(63) {
        return Err(OracleError::CapExceeded { size: n, cap: cap.min(63) });
    }
    let points = gpds.metric.size();
    // cover_point[p]: disks whose open ball contains metric point p.
    let mut cover_point = vec![0u64; points];
    for (i, d) in gpds.disks.iter().enumerate() {
        for (p, mask) in cover_point.iter_mut().enumerate() {
            if gpds.metric.dist(p, d.center) < d.radius {
                *mask |= 1 << i;
            }
        }
    }
    // coverers[i]: other disks whose ball contains disk i's center.
    let coverers: Vec<u64> = gpds
        .disks
        .iter()
        .enumerate()
        .map(|(i, d)| cover_point[d.center] & !(1 << i))
        .collect();
    let group_masks: Vec<u64> = gpds
        .groups
        .iter()
        .map(|g| g.iter().fold(0u64, |acc, &i| acc | 1 << i))
        .collect();
    let mut best_value = 0.0;
    let mut best: Vec<usize> = Vec::new();
    let mut explored = 0u64;
    'outer: for mask in 0u64..(1u64 << n) {
        explored += 1;
        for &g in &group_masks {
            if (mask & g).count_ones() > 1 {
                continue 'outer;
            }
        }
        match constraint {
            GpdsConstraint::DisjointCoverage => {
                for &c in &cover_point {
                    if (mask & c).count_ones() > 1 {
                        continue 'outer;
                    }
                }
            }
            GpdsConstraint::UncoveredCenters => {
                let mut rest = mask;
                while rest != 0 {
                    let i = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    if mask & coverers[i] != 0 {
                        continue 'outer;
                    }
                }
            }
        }
        let chosen = subset_list(mask);
        let value: f64 = chosen.iter().map(|&i| gpds.disks[i].weight).sum();
        if value > best_value || (value == best_value && !best.is_empty() && chosen < best) {
            best_value = value;
            best = chosen;
        }
    }
    Ok(OracleResult {
        value: best_value,
        best: Selection { chosen: best, value: best_value },
        explored,
    })
}

/// Exact maximizer of the exponential-degree objective
/// `rho(U) = sum_{i in U} 0.5^{deg_U(i)}`.
pub fn optimal_msed(graph: &Graph, cap: usize) -> Result<OracleResult<Vec<usize>>, OracleError> {
    let n = graph.vertex_count();
    if n > cap.min(63) {
        return Err(OracleError::CapExceeded { size: n, cap: cap.min(63) });
    }
    let mut best_value = 0.0;
    let mut best: Vec<usize> = Vec::new();
    let mut explored = 0u64;
    for mask in 0u64..(1u64 << n) {
        explored += 1;
        let value = graph.msed_of_mask(mask);
        if value > best_value {
            best_value = value;
            best = subset_list(mask);
        } else if value == best_value && mask != 0 {
            let chosen = subset_list(mask);
            if best.is_empty() || chosen < best {
                best_value = value;
                best = chosen;
            }
        }
    }
    Ok(OracleResult { best, value: best_value, explored })
}

/// Exact maximum independent set by enumeration.
pub fn max_independent_set(
    graph: &Graph,
    cap: usize,
) -> Result<OracleResult<Vec<usize>>, OracleError> {
    let n = graph.vertex_count();
    if n > cap.min(63) {
        return Err(OracleError::CapExceeded { size: n, cap: cap.min(63) });
    }
    let mut best: Vec<usize> = Vec::new();
    let mut explored = 0u64;
    'outer: for mask in 0u64..(1u64 << n) {
        explored += 1;
        let mut rest = mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if mask & graph.neighbors_mask(i) != 0 {
                continue 'outer;
            }
        }
        let chosen = subset_list(mask);
        if chosen.len() > best.len()
            || (chosen.len() == best.len() && !chosen.is_empty() && chosen < best)
        {
            best = chosen;
        }
    }
    let value = best.len() as f64;
    Ok(OracleResult { best, value, explored })
}

/// Exact optimum for weighted disk selection in the plane: at most `budget`
/// disks, no chosen center strictly inside another chosen disk.
pub fn optimal_wds(
    disks: &[Disk],
    budget: usize,
    cap: usize,
) -> Result<OracleResult<Vec<usize>>, OracleError> {
    let n = disks.len();
    if n > cap.min(63) {
        return Err(OracleError::CapExceeded { size: n, cap: cap.min(63) });
    }
    let coverers: Vec<u64> = disks
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mut mask = 0u64;
            for (i2, d2) in disks.iter().enumerate() {
                if i2 != i && d.center.dist(&d2.center) < d2.radius {
                    mask |= 1 << i2;
                }
            }
            mask
        })
        .collect();
    let mut best_value = 0.0;
    let mut best: Vec<usize> = Vec::new();
    let mut explored = 0u64;
    'outer: for mask in 0u64..(1u64 << n) {
        explored += 1;
        if mask.count_ones() as usize > budget {
            continue;
        }
        let mut rest = mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if mask & coverers[i] != 0 {
                continue 'outer;
            }
        }
        let chosen = subset_list(mask);
        let value: f64 = chosen.iter().map(|&i| disks[i].weight).sum();
        if value > best_value || (value == best_value && !best.is_empty() && chosen < best) {
            best_value = value;
            best = chosen;
        }
    }
    Ok(OracleResult { best, value: best_value, explored })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiscountModel, Metric};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nn_instance(values: Vec<Vec<f64>>, dist: Vec<Vec<f64>>) -> Instance {
        Instance::new(values, Metric::from_rows(dist).unwrap(), DiscountModel::NearestNeighbor)
            .unwrap()
    }

    #[test]
    fn matching_examples() {
        assert_eq!(max_weight_matching(&[vec![5.0]]).0, 5.0);
        assert_eq!(max_weight_matching(&[vec![3.0, 1.0], vec![1.0, 3.0]]).0, 6.0);
        let (value, pairs) = max_weight_matching(&[vec![3.0, 3.0], vec![3.0, 1.0]]);
        assert_eq!(value, 6.0);
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn matching_leaves_bad_cells_unmatched() {
        let (value, pairs) = max_weight_matching(&[vec![-2.0, 4.0], vec![-1.0, -3.0]]);
        assert_eq!(value, 4.0);
        assert_eq!(pairs, vec![(0, 1)]);
    }

    #[test]
    fn allocation_uses_both_slots_when_far() {
        let inst = nn_instance(
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![vec![0.0, 0.6], vec![0.6, 0.0]],
        );
        let res = optimal_allocation(&inst).unwrap();
        assert!((res.value - 1.2).abs() < 1e-12);
        assert_eq!(res.best.occupied_slots(), vec![0, 1]);
        assert_eq!(res.explored, 4);
    }

    #[test]
    fn allocation_collapses_to_one_slot_when_close() {
        let inst = nn_instance(
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![vec![0.0, 0.1], vec![0.1, 0.0]],
        );
        let res = optimal_allocation(&inst).unwrap();
        assert!((res.value - 1.0).abs() < 1e-12);
        assert_eq!(res.best.len(), 1);
    }

    #[test]
    fn allocation_single_cell() {
        let inst = nn_instance(vec![vec![7.0]], vec![vec![0.0]]);
        let res = optimal_allocation(&inst).unwrap();
        assert_eq!(res.value, 7.0);
        assert_eq!(res.best.pairs(), &[(0, 0)]);
    }

    #[test]
    fn allocation_cap_is_enforced() {
        let inst = nn_instance(
            vec![vec![1.0, 1.0, 1.0]],
            vec![
                vec![0.0, 0.5, 0.5],
                vec![0.5, 0.0, 0.5],
                vec![0.5, 0.5, 0.0],
            ],
        );
        assert!(matches!(
            optimal_allocation_capped(&inst, 2),
            Err(OracleError::CapExceeded { size: 3, cap: 2 })
        ));
    }

    /// The assignment step must agree with plain permutation enumeration.
    #[test]
    fn assignment_matches_permutation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(1..=4);
            let w: Vec<Vec<f64>> =
                (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
            let (got, _) = max_weight_matching(&w);
            let mut best = 0.0f64;
            // Enumerate column choices per row, allowing "unmatched".
            let mut stack = vec![(0usize, 0u32, 0.0f64)];
            while let Some((row, used, acc)) = stack.pop() {
                if row == n {
                    best = best.max(acc);
                    continue;
                }
                stack.push((row + 1, used, acc));
                for j in 0..m {
                    if used >> j & 1 == 0 {
                        stack.push((row + 1, used | 1 << j, acc + w[row][j]));
                    }
                }
            }
            assert!((got - best).abs() < 1e-9, "{got} vs {best}");
        }
    }

    #[test]
    fn oracle_dominates_random_matchings() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(2..=5);
            let values: Vec<Vec<f64>> =
                (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
            let metric = crate::harness::gen_random_metric(m, &mut rng);
            let model = if rng.gen_bool(0.5) {
                DiscountModel::NearestNeighbor
            } else {
                DiscountModel::ProductDistance
            };
            let inst = Instance::new(values, metric, model).unwrap();
            let opt = optimal_allocation(&inst).unwrap();
            for _ in 0..20 {
                let k = rng.gen_range(0..=n.min(m));
                let mut slots: Vec<usize> = (0..m).collect();
                let mut ads: Vec<usize> = (0..n).collect();
                for i in (1..slots.len()).rev() {
                    slots.swap(i, rng.gen_range(0..=i));
                }
                for i in (1..ads.len()).rev() {
                    ads.swap(i, rng.gen_range(0..=i));
                }
                let pairs: Vec<(usize, usize)> =
                    ads.iter().zip(&slots).take(k).map(|(&i, &j)| (i, j)).collect();
                let matching = Matching::new(pairs).unwrap();
                let sw = social_welfare(&matching, &inst).unwrap();
                assert!(sw <= opt.value + 1e-9);
            }
        }
    }

    #[test]
    fn gpds_oracle_examples() {
        use crate::nnlp::{GpdsConstraint, GpdsInstance, PseudoDisk};
        let metric = Metric::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();

        let single = GpdsInstance {
            disks: vec![PseudoDisk { center: 0, radius: 0.4, weight: 2.5, tag: (0, 0, 1) }],
            groups: vec![vec![0]],
            metric: metric.clone(),
        };
        for c in [GpdsConstraint::DisjointCoverage, GpdsConstraint::UncoveredCenters] {
            let res = optimal_gpds(&single, c, DEFAULT_CAP).unwrap();
            assert_eq!(res.best.chosen, vec![0]);
            assert_eq!(res.value, 2.5);
        }

        // Two non-conflicting disks in one group: the group cap keeps one.
        let same_group = GpdsInstance {
            disks: vec![
                PseudoDisk { center: 0, radius: 0.4, weight: 3.0, tag: (0, 0, 1) },
                PseudoDisk { center: 1, radius: 0.4, weight: 5.0, tag: (0, 1, 0) },
            ],
            groups: vec![vec![0, 1]],
            metric: metric.clone(),
        };
        let res =
            optimal_gpds(&same_group, GpdsConstraint::UncoveredCenters, DEFAULT_CAP).unwrap();
        assert_eq!(res.value, 5.0);
        assert_eq!(res.best.chosen, vec![1]);

        // Mutually covering centers in different groups: only one survives
        // under either constraint.
        let close = Metric::from_rows(vec![vec![0.0, 0.2], vec![0.2, 0.0]]).unwrap();
        let conflicting = GpdsInstance {
            disks: vec![
                PseudoDisk { center: 0, radius: 0.5, weight: 1.0, tag: (0, 0, 1) },
                PseudoDisk { center: 1, radius: 0.5, weight: 4.0, tag: (1, 1, 0) },
            ],
            groups: vec![vec![0], vec![1]],
            metric: close,
        };
        for c in [GpdsConstraint::DisjointCoverage, GpdsConstraint::UncoveredCenters] {
            let res = optimal_gpds(&conflicting, c, DEFAULT_CAP).unwrap();
            assert_eq!(res.value, 4.0);
        }
    }

    #[test]
    fn msed_examples() {
        let empty = Graph::new(3, &[]).unwrap();
        let res = optimal_msed(&empty, DEFAULT_CAP).unwrap();
        assert_eq!(res.value, 3.0);
        assert_eq!(res.best, vec![0, 1, 2]);

        let triangle = Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let res = optimal_msed(&triangle, DEFAULT_CAP).unwrap();
        assert_eq!(res.value, 1.0);
        assert_eq!(res.explored, 8);

        let edge = Graph::new(2, &[(0, 1)]).unwrap();
        let res = optimal_msed(&edge, DEFAULT_CAP).unwrap();
        assert_eq!(res.value, 1.0);
        assert_eq!(res.explored, 4);
    }

    #[test]
    fn mis_finds_independent_sets() {
        let path = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let res = max_independent_set(&path, DEFAULT_CAP).unwrap();
        assert_eq!(res.best, vec![0, 2]);
    }
}

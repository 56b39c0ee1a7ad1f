//! Constant-factor allocation for the nearest-neighbor model.
//!
//! The instance is reduced to a grouped pseudo-disk selection problem: one
//! group per advertiser, one disk per ordered slot pair `(j, j')` with center
//! `j`, radius `d(j, j') / 2` and weight `v[i][j] * d(j, j')`. A linear
//! relaxation of the disjoint-coverage variant is solved and rounded to a
//! selection in which no chosen center lies strictly inside another chosen
//! disk; that selection converts back to a matching. The rounding admits each
//! disk with probability exactly `x*_i / 9`, which makes the expected output
//! value a fixed fraction of the LP objective and hence monotone in every
//! bid.

use crate::lp::{solve_lp_max, LinearProgram, LpError};
use crate::model::{social_welfare, DiscountModel, Instance, Matching, Metric, ModelError};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnLpError {
    #[error("the reduction needs a nearest-neighbor instance")]
    WrongModel,
    #[error("the pipeline needs at least two slots, got {0}")]
    TooFewSlots(usize),
    #[error("selection is infeasible: {0}")]
    InfeasibleSelection(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// An open ball around a metric point: covers exactly the points at distance
/// strictly smaller than `radius` from `center`.
#[derive(Clone, Debug)]
pub struct PseudoDisk {
    pub center: usize,
    pub radius: f64,
    pub weight: f64,
    /// Originating triple (advertiser, slot, other slot) when the disk comes
    /// from the reduction.
    pub tag: (usize, usize, usize),
}

impl PseudoDisk {
    /// Strict open-ball coverage.
    pub fn covers(&self, point: usize, metric: &Metric) -> bool {
        metric.dist(point, self.center) < self.radius
    }
}

/// Disks partitioned into groups; a selection may take at most one disk per
/// group.
#[derive(Clone, Debug)]
pub struct GpdsInstance {
    pub disks: Vec<PseudoDisk>,
    pub groups: Vec<Vec<usize>>,
    pub metric: Metric,
}

/// Which coverage requirement a selection must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GpdsConstraint {
    /// Every metric point is covered by at most one selected disk.
    DisjointCoverage,
    /// No selected disk's center is covered by another selected disk.
    UncoveredCenters,
}

#[derive(Clone, Debug, Default)]
pub struct Selection {
    pub chosen: Vec<usize>,
    pub value: f64,
}

impl GpdsInstance {
    pub fn group_of(&self) -> Vec<usize> {
        let n = self.disks.len();
        let mut g = vec![usize::MAX; n];
        for (k, members) in self.groups.iter().enumerate() {
            for &i in members {
                g[i] = k;
            }
        }
        g
    }

    /// At most one disk per group and no chosen center strictly inside
    /// another chosen disk.
    pub fn selection_is_center_free(&self, chosen: &[usize]) -> bool {
        let group_of = self.group_of();
        for (a, &i) in chosen.iter().enumerate() {
            for &i2 in &chosen[a + 1..] {
                if group_of[i] == group_of[i2] {
                    return false;
                }
            }
            for &i2 in chosen {
                if i2 != i && self.disks[i2].covers(self.disks[i].center, &self.metric) {
                    return false;
                }
            }
        }
        true
    }
}

/// Builds the grouped pseudo-disk instance for a nearest-neighbor instance.
/// With fewer than two slots there are no pairs and the result is empty; the
/// caller falls back to a single-slot allocation.
pub fn reduce_nn_to_gpds(instance: &Instance) -> Result<GpdsInstance, NnLpError> {
    if instance.model() != DiscountModel::NearestNeighbor {
        return Err(NnLpError::WrongModel);
    }
    let n = instance.n();
    let m = instance.m();
    let mut disks = Vec::new();
    let mut groups = vec![Vec::new(); n];
    if m >= 2 {
        for i in 0..n {
            for j in 0..m {
                for j2 in 0..m {
                    if j2 == j {
                        continue;
                    }
                    let d = instance.metric().dist(j, j2);
                    groups[i].push(disks.len());
                    disks.push(PseudoDisk {
                        center: j,
                        radius: d / 2.0,
                        weight: instance.value(i, j) * d,
                        tag: (i, j, j2),
                    });
                }
            }
        }
    }
    Ok(GpdsInstance { disks, groups, metric: instance.metric().clone() })
}

/// The relaxation together with the map from LP variables back to disk
/// indices. Zero-weight disks are pruned before the LP is built; the optimum
/// is unchanged.
#[derive(Clone, Debug)]
pub struct RelaxedLp {
    pub lp: LinearProgram,
    pub vars: Vec<usize>,
}

pub fn build_lp_relax(gpds: &GpdsInstance) -> RelaxedLp {
    let vars: Vec<usize> = (0..gpds.disks.len())
        .filter(|&i| gpds.disks[i].weight > 0.0)
        .collect();
    let objective: Vec<f64> = vars.iter().map(|&i| gpds.disks[i].weight).collect();
    let mut constraints = Vec::new();
    for p in 0..gpds.metric.size() {
        let row: Vec<f64> = vars
            .iter()
            .map(|&i| if gpds.disks[i].covers(p, &gpds.metric) { 1.0 } else { 0.0 })
            .collect();
        if row.iter().any(|&c| c != 0.0) {
            constraints.push((row, 1.0));
        }
    }
    for group in &gpds.groups {
        let row: Vec<f64> = vars
            .iter()
            .map(|&i| if group.contains(&i) { 1.0 } else { 0.0 })
            .collect();
        if row.iter().any(|&c| c != 0.0) {
            constraints.push((row, 1.0));
        }
    }
    let bounds = vec![(0.0, 1.0); vars.len()];
    RelaxedLp { lp: LinearProgram { objective, constraints, bounds }, vars }
}

#[derive(Clone, Debug)]
pub struct LpRelaxation {
    /// Optimal variable values indexed by disk (zero for pruned disks).
    pub xstar: Vec<f64>,
    pub objective: f64,
}

pub fn solve_lp_relax(gpds: &GpdsInstance) -> Result<LpRelaxation, NnLpError> {
    let relaxed = build_lp_relax(gpds);
    if relaxed.vars.is_empty() {
        return Ok(LpRelaxation { xstar: vec![0.0; gpds.disks.len()], objective: 0.0 });
    }
    let sol = solve_lp_max(&relaxed.lp)?;
    let mut xstar = vec![0.0; gpds.disks.len()];
    for (v, &disk) in relaxed.vars.iter().enumerate() {
        xstar[disk] = sol.x[v].clamp(0.0, 1.0);
    }
    Ok(LpRelaxation { xstar, objective: sol.value })
}

#[derive(Clone, Default)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn new(n: usize) -> Self {
        BitSet { words: vec![0; n.div_ceil(64)] }
    }

    #[inline]
    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    fn intersects(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }
}

/// One sampled rounding. `value_estimate` is the conditional expectation of
/// the selection value given the first sampling stage, with the admission
/// coins integrated out analytically; it has the same mean as
/// `selection.value` at a fraction of the variance.
#[derive(Clone, Debug)]
pub struct RoundingTrial {
    pub selection: Selection,
    pub value_estimate: f64,
}

/// Reusable rounding state for a fixed LP solution: per-disk inclusion and
/// admission probabilities plus the conflict sets they are computed from.
pub struct Rounder<'a> {
    gpds: &'a GpdsInstance,
    include_prob: Vec<f64>,
    admit_prob: Vec<f64>,
    /// x*_i w_i / (9 prod_i): coefficient of the conditional-mean estimate.
    estimate_coef: Vec<f64>,
    blocked: Vec<BitSet>,
}

impl<'a> Rounder<'a> {
    pub fn new(gpds: &'a GpdsInstance, xstar: &[f64]) -> Self {
        let n = gpds.disks.len();
        assert_eq!(xstar.len(), n, "solution length must match the disk count");
        let group_of = gpds.group_of();
        let x: Vec<f64> = xstar.iter().map(|&v| v.clamp(0.0, 1.0)).collect();
        let mut blocked = vec![BitSet::new(n); n];
        let mut admit_prob = vec![0.0; n];
        let mut estimate_coef = vec![0.0; n];
        for i in 0..n {
            let mut prod = 1.0;
            for i2 in 0..n {
                if i2 == i {
                    continue;
                }
                let conflict = group_of[i2] == group_of[i]
                    || gpds.disks[i2].covers(gpds.disks[i].center, &gpds.metric);
                if conflict {
                    blocked[i].set(i2);
                    prod *= 1.0 - x[i2] / 3.0;
                }
            }
            // LP feasibility keeps the blocked mass below 2/3.
            assert!(
                prod >= 1.0 / 3.0 - 1e-6,
                "admission denominator {prod} below 1/3 signals an infeasible LP solution"
            );
            let p = (1.0 / 3.0) / prod;
            assert!(
                (0.0..=1.0 + 1e-9).contains(&p),
                "admission probability {p} outside [0, 1]"
            );
            admit_prob[i] = p.min(1.0);
            estimate_coef[i] = x[i] * gpds.disks[i].weight / (9.0 * prod);
        }
        let include_prob = x.iter().map(|&v| v / 3.0).collect();
        Rounder { gpds, include_prob, admit_prob, estimate_coef, blocked }
    }

    pub fn round(&self, rng: &mut (impl Rng + ?Sized)) -> Selection {
        self.round_trial(rng).selection
    }

    pub fn round_trial(&self, rng: &mut (impl Rng + ?Sized)) -> RoundingTrial {
        let n = self.gpds.disks.len();
        let mut stage1 = BitSet::new(n);
        let mut members = Vec::new();
        for i in 0..n {
            if rng.gen::<f64>() < self.include_prob[i] {
                stage1.set(i);
                members.push(i);
            }
        }
        let mut chosen = Vec::new();
        let mut value = 0.0;
        for &i in &members {
            if !stage1.intersects(&self.blocked[i]) && rng.gen::<f64>() < self.admit_prob[i] {
                chosen.push(i);
                value += self.gpds.disks[i].weight;
            }
        }
        let mut value_estimate = 0.0;
        for i in 0..n {
            if self.estimate_coef[i] != 0.0 && !stage1.intersects(&self.blocked[i]) {
                value_estimate += self.estimate_coef[i];
            }
        }
        let selection = Selection { chosen, value };
        assert!(
            self.gpds.selection_is_center_free(&selection.chosen),
            "rounded selection violates the center-coverage constraint"
        );
        RoundingTrial { selection, value_estimate }
    }
}

/// Samples one selection from the LP solution.
pub fn round_lp(
    gpds: &GpdsInstance,
    xstar: &[f64],
    rng: &mut (impl Rng + ?Sized),
) -> Selection {
    Rounder::new(gpds, xstar).round(rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConversionMode {
    /// Match each chosen disk's advertiser to its center slot.
    Plain,
    /// Additionally pin a zero-value virtual advertiser at a fresh slot at
    /// distance `radius` from each chosen center, so each real pair
    /// contributes exactly half its disk weight.
    Virtual,
}

#[derive(Clone, Debug)]
pub struct Converted {
    pub matching: Matching,
    pub welfare: f64,
}

fn check_selection(gpds: &GpdsInstance, sel: &Selection) -> Result<(), NnLpError> {
    if !gpds.selection_is_center_free(&sel.chosen) {
        return Err(NnLpError::InfeasibleSelection(
            "a chosen center is covered or a group is used twice".into(),
        ));
    }
    let mut slots: Vec<usize> = sel.chosen.iter().map(|&i| gpds.disks[i].tag.1).collect();
    slots.sort_unstable();
    slots.dedup();
    if slots.len() != sel.chosen.len() {
        return Err(NnLpError::InfeasibleSelection("two chosen disks share a slot".into()));
    }
    Ok(())
}

/// Extends the instance with one virtual slot per chosen disk and the
/// matching that pins a zero-value advertiser there. Distances from a virtual
/// slot go through its parent and are clipped at 1, which preserves the
/// triangle inequality.
pub fn virtual_extension(
    gpds: &GpdsInstance,
    sel: &Selection,
    instance: &Instance,
) -> Result<(Instance, Matching), NnLpError> {
    check_selection(gpds, sel)?;
    let n = instance.n();
    let m = instance.m();
    let k = sel.chosen.len();
    let parents: Vec<usize> = sel.chosen.iter().map(|&i| gpds.disks[i].tag.1).collect();
    let offsets: Vec<f64> = sel.chosen.iter().map(|&i| gpds.disks[i].radius).collect();

    let mut dist = vec![vec![0.0; m + k]; m + k];
    for a in 0..m {
        for b in 0..m {
            dist[a][b] = instance.metric().dist(a, b);
        }
    }
    for t in 0..k {
        for p in 0..m {
            let d = (instance.metric().dist(parents[t], p) + offsets[t]).min(1.0);
            dist[m + t][p] = d;
            dist[p][m + t] = d;
        }
        for s in 0..t {
            let d = (offsets[t] + instance.metric().dist(parents[t], parents[s]) + offsets[s])
                .min(1.0);
            dist[m + t][m + s] = d;
            dist[m + s][m + t] = d;
        }
    }
    let metric = Metric::from_rows(dist)?;

    let mut values = vec![vec![0.0; m + k]; n + k];
    for i in 0..n {
        values[i][..m].copy_from_slice(&instance.values()[i][..m]);
    }
    let extended = Instance::new(values, metric, DiscountModel::NearestNeighbor)?;

    let mut pairs: Vec<(usize, usize)> = sel
        .chosen
        .iter()
        .map(|&i| (gpds.disks[i].tag.0, gpds.disks[i].tag.1))
        .collect();
    for t in 0..k {
        pairs.push((n + t, m + t));
    }
    Ok((extended, Matching::new(pairs)?))
}

pub fn selection_to_matching(
    gpds: &GpdsInstance,
    sel: &Selection,
    instance: &Instance,
    mode: ConversionMode,
) -> Result<Converted, NnLpError> {
    match mode {
        ConversionMode::Plain => {
            check_selection(gpds, sel)?;
            let pairs: Vec<(usize, usize)> = sel
                .chosen
                .iter()
                .map(|&i| (gpds.disks[i].tag.0, gpds.disks[i].tag.1))
                .collect();
            let matching = Matching::new(pairs)?;
            let welfare = social_welfare(&matching, instance)?;
            Ok(Converted { matching, welfare })
        }
        ConversionMode::Virtual => {
            let (extended, full) = virtual_extension(gpds, sel, instance)?;
            let welfare = social_welfare(&full, &extended)?;
            let real_pairs: Vec<(usize, usize)> = full
                .pairs()
                .iter()
                .copied()
                .filter(|&(i, _)| i < instance.n())
                .collect();
            Ok(Converted { matching: Matching::new(real_pairs)?, welfare })
        }
    }
}

/// Reduction, relaxation and precomputed rounding state for one instance, so
/// many trials can share a single LP solve.
pub struct NnLpPipeline {
    pub gpds: GpdsInstance,
    pub relaxation: LpRelaxation,
}

impl NnLpPipeline {
    pub fn prepare(instance: &Instance) -> Result<Self, NnLpError> {
        if instance.m() < 2 {
            return Err(NnLpError::TooFewSlots(instance.m()));
        }
        let gpds = reduce_nn_to_gpds(instance)?;
        let relaxation = solve_lp_relax(&gpds)?;
        Ok(NnLpPipeline { gpds, relaxation })
    }

    pub fn rounder(&self) -> Rounder<'_> {
        Rounder::new(&self.gpds, &self.relaxation.xstar)
    }

    pub fn lp_objective(&self) -> f64 {
        self.relaxation.objective
    }
}

#[derive(Clone, Debug)]
pub struct NnApproxRun {
    pub matching: Matching,
    pub welfare: f64,
    pub lp_objective: f64,
    pub selection: Selection,
}

/// One full run: reduce, solve the relaxation, round once and convert. With a
/// single slot (or a single advertiser on one slot) the reduction is empty;
/// the best single cell is matched directly.
pub fn nn_constant_approx(
    instance: &Instance,
    mode: ConversionMode,
    rng: &mut impl Rng,
) -> Result<NnApproxRun, NnLpError> {
    if instance.model() != DiscountModel::NearestNeighbor {
        return Err(NnLpError::WrongModel);
    }
    if instance.n() == 0 || instance.m() == 0 {
        return Ok(NnApproxRun {
            matching: Matching::empty(),
            welfare: 0.0,
            lp_objective: 0.0,
            selection: Selection::default(),
        });
    }
    if instance.m() == 1 {
        let mut best = (0usize, instance.value(0, 0));
        for i in 1..instance.n() {
            if instance.value(i, 0) > best.1 {
                best = (i, instance.value(i, 0));
            }
        }
        let matching = Matching::new(vec![(best.0, 0)])?;
        let welfare = social_welfare(&matching, instance)?;
        return Ok(NnApproxRun {
            matching,
            welfare,
            lp_objective: welfare,
            selection: Selection::default(),
        });
    }
    let pipeline = NnLpPipeline::prepare(instance)?;
    let selection = pipeline.rounder().round(rng);
    let converted = selection_to_matching(&pipeline.gpds, &selection, instance, mode)?;
    Ok(NnApproxRun {
        matching: converted.matching,
        welfare: converted.welfare,
        lp_objective: pipeline.lp_objective(),
        selection,
    })
}

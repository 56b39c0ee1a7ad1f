//! Near-optimal allocation for unit-value advertisers on a 2D Euclidean
//! layout.
//!
//! The instance reduces to weighted disk selection: for every ordered slot
//! pair `(j, j')` there is an open disk centered at `j` with radius
//! `d(j, j')` and weight `u_j * d(j, j')`, pairs closer than `eps / m`
//! dropped. A selection must keep every chosen center outside every other
//! chosen disk and may take at most one disk per advertiser.
//!
//! The selection problem is solved by a shifted-grid dynamic program. Disks
//! are bucketed into levels by diameter (factor `k + 1` per level,
//! `k = floor(1/eps)`), each level is cut by gridlines at one of `k`
//! offsets per axis, disks crossing a line of their own level are discarded,
//! and the surviving disks are processed over the resulting cell tree. A
//! table entry is keyed by a cell, the set of already-chosen coarser disks
//! that reach into it, and the number of disks still allowed; the best
//! offset pair wins.

use crate::model::{
    normalize_points, social_welfare, DiscountModel, Instance, Matching, Metric, ModelError,
    Point,
};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PtasError {
    #[error("eps must lie in (0, 0.5), got {0}")]
    EpsOutOfRange(f64),
    #[error("dynamic program exceeded the work cap of {cap} updates")]
    WorkCapExceeded { cap: u64 },
    #[error("selection needs {selected} advertisers but only {available} exist")]
    TooManyChosen { selected: usize, available: usize },
    #[error("disk has no originating slot pair")]
    MissingSource,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Default cap on dynamic-program updates.
pub const DEFAULT_WORK_CAP: u64 = 100_000_000;

/// An open disk in the plane with a weight.
#[derive(Clone, Debug)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
    pub weight: f64,
    /// Originating ordered slot pair when built by the reduction.
    pub source: Option<(usize, usize)>,
}

impl Disk {
    /// Strict open coverage of a point.
    pub fn covers(&self, p: &Point) -> bool {
        self.center.dist(p) < self.radius
    }
}

/// Two disks are incompatible when either center lies strictly inside the
/// other disk.
pub fn disks_conflict(a: &Disk, b: &Disk) -> bool {
    let d = a.center.dist(&b.center);
    d < a.radius || d < b.radius
}

#[derive(Clone, Debug)]
pub struct WdsInstance {
    pub disks: Vec<Disk>,
    /// Maximum number of selected disks.
    pub budget: usize,
}

/// Builds the disk-selection instance for unit-value advertisers at the
/// given (already diameter-normalized) coordinates. Pairs closer than
/// `eps / m` yield no disk; the budget equals the advertiser count.
pub fn reduce_nn_to_wds(
    points: &[Point],
    slot_weights: &[f64],
    advertisers: usize,
    eps: f64,
) -> Result<WdsInstance, PtasError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(PtasError::EpsOutOfRange(eps));
    }
    let m = points.len();
    let cutoff = eps / m as f64;
    let mut disks = Vec::new();
    for j in 0..m {
        for j2 in 0..m {
            if j2 == j {
                continue;
            }
            let d = points[j].dist(&points[j2]);
            if d >= cutoff {
                disks.push(Disk {
                    center: points[j],
                    radius: d,
                    weight: slot_weights[j] * d,
                    source: Some((j, j2)),
                });
            }
        }
    }
    Ok(WdsInstance { disks, budget: advertisers })
}

fn grid_resolution(eps: f64) -> usize {
    // floor(1/eps), nudged so that exact reciprocals of integers land on the
    // integer despite rounding.
    (1.0 / eps + 1e-9).floor() as usize
}

/// Bound on the feasible same-level subsets enumerated inside one cell.
pub fn same_level_bound(k: usize) -> f64 {
    16.0 * (k * k) as f64 / std::f64::consts::PI
}

/// Bound on the coarser-disk boundary sets reaching into one cell.
pub fn boundary_bound(k: usize) -> f64 {
    10_000.0 * (k * k) as f64 / std::f64::consts::PI + 20.0
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub level: i32,
    pub ix: i64,
    pub iy: i64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Surviving disks of exactly this level, fully inside this cell.
    pub own_disks: Vec<usize>,
}

/// The leveled, offset-shifted grid over one disk set.
pub struct GridHierarchy {
    pub k: usize,
    pub alpha: usize,
    pub beta: usize,
    pub max_level: usize,
    /// Level per disk; `None` when a gridline of its own level cuts it.
    pub level_of: Vec<Option<usize>>,
    /// Cell tree; index 0 is the virtual root at level -1.
    pub cells: Vec<Cell>,
    scaled_centers: Vec<(f64, f64)>,
    scaled_radii: Vec<f64>,
}

fn natural_level(diameter: f64, k: usize) -> usize {
    // Level j holds diameters in ((k+1)^{-j-1}, (k+1)^{-j}].
    let base = (k + 1) as f64;
    let mut level = 0usize;
    while level < 400 && diameter <= base.powi(-(level as i32) - 1) {
        level += 1;
    }
    level
}

/// Distance from a coordinate to the nearest gridline of the family
/// `(offset + q k) * step` over integer `q`.
fn line_distance(x: f64, step: f64, offset: usize, k: usize) -> f64 {
    let t = (x / step - offset as f64) / k as f64;
    let q0 = t.round() as i64;
    let mut best = f64::INFINITY;
    for dq in -1..=1 {
        let line = (offset as f64 + (q0 + dq) as f64 * k as f64) * step;
        best = best.min((x - line).abs());
    }
    best
}

pub fn build_grid_hierarchy(
    wds: &WdsInstance,
    eps: f64,
    alpha: usize,
    beta: usize,
) -> Result<GridHierarchy, PtasError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(PtasError::EpsOutOfRange(eps));
    }
    let k = grid_resolution(eps);
    let n = wds.disks.len();
    let max_diameter = wds
        .disks
        .iter()
        .map(|d| 2.0 * d.radius)
        .fold(0.0f64, f64::max);
    let inv = if max_diameter > 0.0 { 1.0 / max_diameter } else { 1.0 };
    let scaled_centers: Vec<(f64, f64)> =
        wds.disks.iter().map(|d| (d.center.x * inv, d.center.y * inv)).collect();
    let scaled_radii: Vec<f64> = wds.disks.iter().map(|d| d.radius * inv).collect();

    let levels: Vec<usize> =
        scaled_radii.iter().map(|&r| natural_level(2.0 * r, k)).collect();
    let max_level = levels.iter().copied().max().unwrap_or(0);

    let base = (k + 1) as f64;
    let mut level_of = vec![None; n];
    let mut cell_key = vec![(0i64, 0i64); n];
    for i in 0..n {
        let j = levels[i];
        let step = base.powi(-(j as i32));
        let (cx, cy) = scaled_centers[i];
        let r = scaled_radii[i];
        // Tangency does not count as crossing: open-disk semantics.
        let crossed = line_distance(cx, step, alpha, k) < r
            || line_distance(cy, step, beta, k) < r;
        if crossed {
            continue;
        }
        level_of[i] = Some(j);
        let ax = ((cx / step - alpha as f64) / k as f64).floor() as i64;
        let ay = ((cy / step - beta as f64) / k as f64).floor() as i64;
        cell_key[i] = (ax, ay);
    }

    let mut cells = vec![Cell {
        level: -1,
        ix: 0,
        iy: 0,
        parent: None,
        children: Vec::new(),
        own_disks: Vec::new(),
    }];
    let mut index: HashMap<(i32, i64, i64), usize> = HashMap::new();
    for i in 0..n {
        let Some(level) = level_of[i] else { continue };
        let (mut ax, mut ay) = cell_key[i];
        let mut lvl = level as i32;
        let mut child: Option<usize> = None;
        loop {
            let key = (lvl, ax, ay);
            let (cell_idx, existed) = match index.get(&key) {
                Some(&idx) => (idx, true),
                None => {
                    cells.push(Cell {
                        level: lvl,
                        ix: ax,
                        iy: ay,
                        parent: None,
                        children: Vec::new(),
                        own_disks: Vec::new(),
                    });
                    let idx = cells.len() - 1;
                    index.insert(key, idx);
                    (idx, false)
                }
            };
            if let Some(c) = child {
                if cells[c].parent.is_none() {
                    cells[c].parent = Some(cell_idx);
                    cells[cell_idx].children.push(c);
                }
            }
            if lvl == level as i32 {
                cells[cell_idx].own_disks.push(i);
            }
            if existed {
                break;
            }
            if lvl == 0 {
                cells[0].children.push(cell_idx);
                cells[cell_idx].parent = Some(0);
                break;
            }
            child = Some(cell_idx);
            // Each level-j cell index A satisfies A = alpha + P (k+1) + t
            // for its parent index P, with t in 0..=k.
            ax = (ax - alpha as i64).div_euclid(k as i64 + 1);
            ay = (ay - beta as i64).div_euclid(k as i64 + 1);
            lvl -= 1;
        }
    }
    for cell in cells.iter_mut() {
        cell.own_disks.sort_unstable();
    }
    Ok(GridHierarchy {
        k,
        alpha,
        beta,
        max_level,
        level_of,
        cells,
        scaled_centers,
        scaled_radii,
    })
}

impl GridHierarchy {
    pub fn survivors(&self) -> Vec<usize> {
        (0..self.level_of.len()).filter(|&i| self.level_of[i].is_some()).collect()
    }

    /// Closed bounding square of a non-root cell in scaled coordinates.
    pub fn cell_rect(&self, cell: usize) -> (f64, f64, f64, f64) {
        let c = &self.cells[cell];
        debug_assert!(c.level >= 0);
        let step = ((self.k + 1) as f64).powi(-c.level);
        let side = self.k as f64 * step;
        let x0 = (self.alpha as f64 + c.ix as f64 * self.k as f64) * step;
        let y0 = (self.beta as f64 + c.iy as f64 * self.k as f64) * step;
        (x0, x0 + side, y0, y0 + side)
    }

    /// Whether a disk's open ball meets the cell's closed square.
    fn disk_touches_cell(&self, disk: usize, cell: usize) -> bool {
        let (x0, x1, y0, y1) = self.cell_rect(cell);
        let (cx, cy) = self.scaled_centers[disk];
        let dx = (x0 - cx).max(cx - x1).max(0.0);
        let dy = (y0 - cy).max(cy - y1).max(0.0);
        dx.hypot(dy) < self.scaled_radii[disk]
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct DpKey {
    cell: u32,
    quota: u16,
    boundary: Vec<u16>,
}

struct DiskDp<'a> {
    wds: &'a WdsInstance,
    grid: &'a GridHierarchy,
    memo: HashMap<DpKey, (f64, Vec<usize>)>,
    updates: u64,
    work_cap: u64,
    max_boundary: usize,
    max_same_level: usize,
}

impl<'a> DiskDp<'a> {
    fn conflict(&self, a: usize, b: usize) -> bool {
        disks_conflict(&self.wds.disks[a], &self.wds.disks[b])
    }

    fn charge(&mut self, units: u64) -> Result<(), PtasError> {
        self.updates += units;
        if self.updates > self.work_cap {
            Err(PtasError::WorkCapExceeded { cap: self.work_cap })
        } else {
            Ok(())
        }
    }

    /// All subsets of the cell's own disks compatible with the boundary set
    /// and internally feasible, the empty set included.
    fn feasible_subsets(
        &mut self,
        own: &[usize],
        boundary: &[usize],
    ) -> Result<Vec<Vec<usize>>, PtasError> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut current: Vec<usize> = Vec::new();
        self.gather_subsets(own, 0, boundary, &mut current, &mut out)?;
        Ok(out)
    }

    fn gather_subsets(
        &mut self,
        own: &[usize],
        idx: usize,
        boundary: &[usize],
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) -> Result<(), PtasError> {
        if idx == own.len() {
            self.charge(1)?;
            out.push(current.clone());
            return Ok(());
        }
        self.gather_subsets(own, idx + 1, boundary, current, out)?;
        let disk = own[idx];
        let compatible = boundary
            .iter()
            .chain(current.iter())
            .all(|&other| !self.conflict(disk, other));
        if compatible {
            assert!(
                (current.len() + 1) as f64 <= same_level_bound(self.grid.k),
                "same-level feasible set exceeded the packing bound"
            );
            self.max_same_level = self.max_same_level.max(current.len() + 1);
            current.push(disk);
            self.gather_subsets(own, idx + 1, boundary, current, out)?;
            current.pop();
        }
        Ok(())
    }

    fn solve(
        &mut self,
        cell: usize,
        boundary: &[usize],
        quota: usize,
    ) -> Result<(f64, Vec<usize>), PtasError> {
        assert!(
            boundary.len() as f64 <= boundary_bound(self.grid.k),
            "boundary set exceeded the packing bound"
        );
        self.max_boundary = self.max_boundary.max(boundary.len());
        let key = DpKey {
            cell: cell as u32,
            quota: quota as u16,
            boundary: boundary.iter().map(|&d| d as u16).collect(),
        };
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        self.charge(1)?;
        let own = self.grid.cells[cell].own_disks.clone();
        let children = self.grid.cells[cell].children.clone();
        let subsets = self.feasible_subsets(&own, boundary)?;
        let mut best: (f64, Vec<usize>) = (0.0, Vec::new());
        for subset in subsets {
            if subset.len() > quota {
                continue;
            }
            let own_weight: f64 = subset.iter().map(|&d| self.wds.disks[d].weight).sum();
            let remaining = quota - subset.len();
            let mut carried: Vec<usize> = boundary.to_vec();
            carried.extend(&subset);
            carried.sort_unstable();
            // Knapsack over children budgets.
            let mut acc: Vec<Option<(f64, Vec<usize>)>> = vec![None; remaining + 1];
            acc[0] = Some((0.0, Vec::new()));
            for &child in &children {
                let passed: Vec<usize> = carried
                    .iter()
                    .copied()
                    .filter(|&d| self.grid.disk_touches_cell(d, child))
                    .collect();
                let mut next: Vec<Option<(f64, Vec<usize>)>> = vec![None; remaining + 1];
                for used in 0..=remaining {
                    let Some((base_value, base_chosen)) = acc[used].clone() else {
                        continue;
                    };
                    for extra in 0..=remaining - used {
                        self.charge(1)?;
                        let (child_value, child_chosen) =
                            self.solve(child, &passed, extra)?;
                        let total = base_value + child_value;
                        let slot = &mut next[used + extra];
                        if slot.as_ref().map_or(true, |(v, _)| total > *v) {
                            let mut chosen = base_chosen.clone();
                            chosen.extend(child_chosen);
                            *slot = Some((total, chosen));
                        }
                    }
                }
                acc = next;
            }
            let best_children = acc
                .into_iter()
                .flatten()
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                .unwrap_or((0.0, Vec::new()));
            let value = own_weight + best_children.0;
            if value > best.0 {
                let mut chosen = subset.clone();
                chosen.extend(best_children.1);
                best = (value, chosen);
            }
        }
        self.memo.insert(key, best.clone());
        Ok(best)
    }
}

#[derive(Clone, Debug)]
pub struct OffsetValue {
    pub alpha: usize,
    pub beta: usize,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct WdsSelection {
    pub chosen: Vec<usize>,
    pub value: f64,
    pub per_offset: Vec<OffsetValue>,
}

/// One offset pair's dynamic-program outcome, with the largest boundary and
/// same-level set sizes seen while filling the table.
#[derive(Clone, Debug)]
pub struct OffsetRun {
    pub value: f64,
    pub chosen: Vec<usize>,
    pub max_boundary: usize,
    pub max_same_level: usize,
}

/// Best selection for one fixed offset pair.
pub fn ptas_wds_at_offset(
    wds: &WdsInstance,
    eps: f64,
    alpha: usize,
    beta: usize,
    work_cap: u64,
) -> Result<OffsetRun, PtasError> {
    let grid = build_grid_hierarchy(wds, eps, alpha, beta)?;
    let mut dp = DiskDp {
        wds,
        grid: &grid,
        memo: HashMap::new(),
        updates: 0,
        work_cap,
        max_boundary: 0,
        max_same_level: 0,
    };
    let (value, mut chosen) = dp.solve(0, &[], wds.budget)?;
    chosen.sort_unstable();
    Ok(OffsetRun { value, chosen, max_boundary: dp.max_boundary, max_same_level: dp.max_same_level })
}

/// Runs the dynamic program for every offset pair and keeps the best value
/// (lexicographically first offsets on ties). The output is feasible: at
/// most `budget` disks, no chosen center inside another chosen disk.
pub fn ptas_wds(wds: &WdsInstance, eps: f64, work_cap: u64) -> Result<WdsSelection, PtasError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(PtasError::EpsOutOfRange(eps));
    }
    if wds.disks.is_empty() {
        return Ok(WdsSelection { chosen: Vec::new(), value: 0.0, per_offset: Vec::new() });
    }
    let k = grid_resolution(eps);
    let mut per_offset = Vec::with_capacity(k * k);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for alpha in 0..k {
        for beta in 0..k {
            let run = ptas_wds_at_offset(wds, eps, alpha, beta, work_cap)?;
            per_offset.push(OffsetValue { alpha, beta, value: run.value });
            if best.as_ref().map_or(true, |(v, _)| run.value > *v) {
                best = Some((run.value, run.chosen));
            }
        }
    }
    let (value, chosen) = best.expect("at least one offset pair");
    assert!(chosen.len() <= wds.budget, "selection exceeded the budget");
    for (a, &i) in chosen.iter().enumerate() {
        for &i2 in &chosen[a + 1..] {
            assert!(
                !disks_conflict(&wds.disks[i], &wds.disks[i2]),
                "selected disks {i} and {i2} conflict"
            );
            // Feasible pairs keep their half-radius disks disjoint.
            let half = 0.5 * (wds.disks[i].radius + wds.disks[i2].radius);
            assert!(
                wds.disks[i].center.dist(&wds.disks[i2].center) >= half - 1e-12,
                "half-radius packing violated"
            );
        }
    }
    Ok(WdsSelection { chosen, value, per_offset })
}

/// Matches one distinct advertiser to each chosen disk's center slot.
/// Advertisers are interchangeable here (unit values), so they are assigned
/// in slot order.
pub fn wds_selection_to_matching(
    chosen: &[usize],
    wds: &WdsInstance,
    advertisers: usize,
) -> Result<Matching, PtasError> {
    if chosen.len() > advertisers {
        return Err(PtasError::TooManyChosen {
            selected: chosen.len(),
            available: advertisers,
        });
    }
    let mut slots = Vec::with_capacity(chosen.len());
    for &i in chosen {
        let (j, _) = wds.disks[i].source.ok_or(PtasError::MissingSource)?;
        slots.push(j);
    }
    slots.sort_unstable();
    let pairs: Vec<(usize, usize)> = slots.into_iter().enumerate().collect();
    Ok(Matching::new(pairs)?)
}

#[derive(Clone, Debug)]
pub struct PtasRun {
    pub matching: Matching,
    pub welfare: f64,
    /// The diameter-normalized unit-value instance the welfare refers to.
    pub instance: Instance,
    pub selection: WdsSelection,
}

/// End-to-end near-optimal allocation: normalize the layout, reduce to disk
/// selection, run the shifted-grid program, and convert the winner back to a
/// matching. The welfare of the result is at least the selection value.
pub fn ptas_allocate(
    points: &[Point],
    slot_weights: &[f64],
    advertisers: usize,
    eps: f64,
    work_cap: u64,
) -> Result<PtasRun, PtasError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(PtasError::EpsOutOfRange(eps));
    }
    let m = points.len();
    let (pts, _) = normalize_points(points);
    let mut dist = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in 0..m {
            dist[a][b] = pts[a].dist(&pts[b]);
        }
    }
    let metric = Metric::from_rows(dist)?;
    let values = vec![slot_weights.to_vec(); advertisers];
    let instance = Instance::new(values, metric, DiscountModel::NearestNeighbor)?;
    if advertisers == 0 || m == 0 {
        return Ok(PtasRun {
            matching: Matching::empty(),
            welfare: 0.0,
            instance,
            selection: WdsSelection { chosen: Vec::new(), value: 0.0, per_offset: Vec::new() },
        });
    }
    if m == 1 {
        let matching = Matching::new(vec![(0, 0)])?;
        let welfare = social_welfare(&matching, &instance)?;
        return Ok(PtasRun {
            matching,
            welfare,
            instance,
            selection: WdsSelection {
                chosen: Vec::new(),
                value: slot_weights[0],
                per_offset: Vec::new(),
            },
        });
    }
    let wds = reduce_nn_to_wds(&pts, slot_weights, advertisers, eps)?;
    let selection = ptas_wds(&wds, eps, work_cap)?;
    let matching = wds_selection_to_matching(&selection.chosen, &wds, advertisers)?;
    let welfare = social_welfare(&matching, &instance)?;
    assert!(
        welfare >= selection.value - 1e-9,
        "conversion lost value: welfare {welfare} below selection {}",
        selection.value
    );
    Ok(PtasRun { matching, welfare, instance, selection })
}

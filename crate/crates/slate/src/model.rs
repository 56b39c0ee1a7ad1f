//! Instances, metrics, discount functions and the welfare objective.
//!
//! A slate instance is a set of advertisers with per-slot valuations, plus a
//! finite metric over the slots. Placing ads in nearby slots suppresses their
//! value: slot `j`'s contribution is multiplied by a discount that depends on
//! the other occupied slots. Two discounts are supported: the nearest-neighbor
//! discount (distance to the closest other occupied slot) and the
//! product-distance discount (product of distances to all other occupied
//! slots).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default slack for the triangle-inequality and diameter checks; absorbs the
/// rounding of generated Euclidean metrics.
pub const METRIC_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("distance table is not square: row {row} has {len} entries, expected {size}")]
    NotSquare { row: usize, len: usize, size: usize },
    #[error("non-finite entry at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("value table has wrong shape: expected {n} rows of {m}")]
    BadValueShape { n: usize, m: usize },
    #[error("negative or non-finite value at ({i}, {j})")]
    BadValue { i: usize, j: usize },
    #[error("value table size does not match metric: {values} columns vs {metric} points")]
    MetricMismatch { values: usize, metric: usize },
    #[error("slot {0} is not in the occupied set")]
    SlotNotOccupied(usize),
    #[error("advertiser {0} is matched more than once")]
    DuplicateAdvertiser(usize),
    #[error("slot {0} is matched more than once")]
    DuplicateSlot(usize),
    #[error("pair ({i}, {j}) is out of range for an {n} x {m} instance")]
    PairOutOfRange { i: usize, j: usize, n: usize, m: usize },
    #[error("instance is empty")]
    EmptyInstance,
}

/// A finite metric over `size` points, stored as a dense symmetric table.
///
/// Construction only checks shape and finiteness; [`validate_metric`] reports
/// violations of the metric axioms (symmetry, triangle inequality, diameter at
/// most one).
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    size: usize,
    dist: Vec<f64>,
}

impl Metric {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let size = rows.len();
        let mut dist = Vec::with_capacity(size * size);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != size {
                return Err(ModelError::NotSquare { row, len: r.len(), size });
            }
            for (j, &d) in r.iter().enumerate() {
                if !d.is_finite() {
                    return Err(ModelError::NonFinite { i: row, j });
                }
                dist.push(d);
            }
        }
        Ok(Metric { size, dist })
    }

    /// Metric of pairwise Euclidean distances, rescaled by the true diameter
    /// so the farthest pair is at distance exactly 1.
    pub fn from_points(points: &[Point]) -> Self {
        let m = points.len();
        let mut raw = vec![0.0; m * m];
        let mut diam: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let d = points[i].dist(&points[j]);
                raw[i * m + j] = d;
                diam = diam.max(d);
            }
        }
        if diam > 0.0 {
            for d in raw.iter_mut() {
                *d /= diam;
            }
        }
        Metric { size: m, dist: raw }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.size + b]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().cloned().fold(0.0, f64::max)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.size)
            .map(|i| self.dist[i * self.size..(i + 1) * self.size].to_vec())
            .collect()
    }
}

/// A point in the plane. Slot layouts for the Euclidean algorithms are given
/// as lists of these.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Rescales points so the farthest pair is at distance 1. Returns the scaled
/// points and the original diameter. A single point is returned unchanged.
pub fn normalize_points(points: &[Point]) -> (Vec<Point>, f64) {
    let mut diam: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            diam = diam.max(points[i].dist(&points[j]));
        }
    }
    if diam <= 0.0 {
        return (points.to_vec(), 0.0);
    }
    let scaled = points
        .iter()
        .map(|p| Point::new(p.x / diam, p.y / diam))
        .collect();
    (scaled, diam)
}

#[derive(Clone, Debug, PartialEq)]
pub enum MetricViolation {
    NonzeroDiagonal { i: usize, value: f64 },
    Negative { i: usize, j: usize, value: f64 },
    Asymmetric { i: usize, j: usize, forward: f64, backward: f64 },
    /// d(a, c) exceeds d(a, b) + d(b, c) by more than the slack.
    Triangle { a: usize, b: usize, c: usize, direct: f64, detour: f64 },
    Diameter { i: usize, j: usize, value: f64 },
}

#[derive(Clone, Debug, Default)]
pub struct MetricReport {
    pub violations: Vec<MetricViolation>,
}

impl MetricReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_metric(metric: &Metric) -> MetricReport {
    validate_metric_with_slack(metric, METRIC_SLACK)
}

/// Checks every symmetry, triangle and diameter constraint and reports each
/// violation. The report is empty iff the table is a metric with diameter at
/// most 1 (up to `slack`).
pub fn validate_metric_with_slack(metric: &Metric, slack: f64) -> MetricReport {
    let m = metric.size();
    let mut violations = Vec::new();
    for i in 0..m {
        if metric.dist(i, i).abs() > slack {
            violations.push(MetricViolation::NonzeroDiagonal { i, value: metric.dist(i, i) });
        }
        for j in 0..m {
            let d = metric.dist(i, j);
            if d < -slack {
                violations.push(MetricViolation::Negative { i, j, value: d });
            }
            if j > i {
                let back = metric.dist(j, i);
                if (d - back).abs() > slack {
                    violations.push(MetricViolation::Asymmetric { i, j, forward: d, backward: back });
                }
                if d > 1.0 + slack {
                    violations.push(MetricViolation::Diameter { i, j, value: d });
                }
            }
        }
    }
    for a in 0..m {
        for b in 0..m {
            if b == a {
                continue;
            }
            for c in 0..m {
                if c == a || c == b {
                    continue;
                }
                let direct = metric.dist(a, c);
                let detour = metric.dist(a, b) + metric.dist(b, c);
                if direct > detour + slack {
                    violations.push(MetricViolation::Triangle { a, b, c, direct, detour });
                }
            }
        }
    }
    MetricReport { violations }
}

/// Which discount multiplies an occupied slot's value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscountModel {
    #[serde(rename = "nn")]
    NearestNeighbor,
    #[serde(rename = "pd")]
    ProductDistance,
}

/// Nearest-neighbor discount of slot `j` given the occupied set: 1 when `j`
/// is the only occupied slot, otherwise the distance to the closest other
/// occupied slot.
pub fn nn_discount(j: usize, occupied: &[usize], metric: &Metric) -> Result<f64, ModelError> {
    if !occupied.contains(&j) {
        return Err(ModelError::SlotNotOccupied(j));
    }
    let mut best = f64::INFINITY;
    for &other in occupied {
        if other != j {
            best = best.min(metric.dist(j, other));
        }
    }
    Ok(if best.is_finite() { best } else { 1.0 })
}

/// Product-distance discount of slot `j` given the occupied set: 1 when `j`
/// is the only occupied slot, otherwise the product of distances to all other
/// occupied slots.
pub fn pd_discount(j: usize, occupied: &[usize], metric: &Metric) -> Result<f64, ModelError> {
    if !occupied.contains(&j) {
        return Err(ModelError::SlotNotOccupied(j));
    }
    let mut prod = 1.0;
    for &other in occupied {
        if other != j {
            prod *= metric.dist(j, other);
        }
    }
    Ok(prod)
}

pub fn discount(
    model: DiscountModel,
    j: usize,
    occupied: &[usize],
    metric: &Metric,
) -> Result<f64, ModelError> {
    match model {
        DiscountModel::NearestNeighbor => nn_discount(j, occupied, metric),
        DiscountModel::ProductDistance => pd_discount(j, occupied, metric),
    }
}

/// Advertisers x slots with a metric over the slots. Immutable after
/// construction; algorithms that need extra zero-value advertisers pad
/// internally rather than mutating the instance.
#[derive(Clone, Debug)]
pub struct Instance {
    values: Vec<Vec<f64>>,
    metric: Metric,
    model: DiscountModel,
}

impl Instance {
    pub fn new(
        values: Vec<Vec<f64>>,
        metric: Metric,
        model: DiscountModel,
    ) -> Result<Self, ModelError> {
        let m = metric.size();
        for (i, row) in values.iter().enumerate() {
            if row.len() != m {
                return Err(ModelError::MetricMismatch { values: row.len(), metric: m });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(ModelError::BadValue { i, j });
                }
            }
        }
        Ok(Instance { values, metric, model })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn m(&self) -> usize {
        self.metric.size()
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn model(&self) -> DiscountModel {
        self.model
    }
}

/// Factorized valuations: advertiser `i` values slot `j` at `w[i] * u[j]`.
#[derive(Clone, Debug)]
pub struct FactorizedInstance {
    slot_weights: Vec<f64>,
    advertiser_values: Vec<f64>,
    metric: Metric,
}

impl FactorizedInstance {
    pub fn new(
        slot_weights: Vec<f64>,
        advertiser_values: Vec<f64>,
        metric: Metric,
    ) -> Result<Self, ModelError> {
        if slot_weights.len() != metric.size() {
            return Err(ModelError::MetricMismatch {
                values: slot_weights.len(),
                metric: metric.size(),
            });
        }
        for (j, &u) in slot_weights.iter().enumerate() {
            if !u.is_finite() || u < 0.0 {
                return Err(ModelError::BadValue { i: 0, j });
            }
        }
        for (i, &w) in advertiser_values.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(ModelError::BadValue { i, j: 0 });
            }
        }
        Ok(FactorizedInstance { slot_weights, advertiser_values, metric })
    }

    pub fn n(&self) -> usize {
        self.advertiser_values.len()
    }

    pub fn m(&self) -> usize {
        self.slot_weights.len()
    }

    pub fn slot_weights(&self) -> &[f64] {
        &self.slot_weights
    }

    pub fn advertiser_values(&self) -> &[f64] {
        &self.advertiser_values
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    /// The implied dense nearest-neighbor instance with `v[i][j] = w[i] * u[j]`.
    pub fn to_instance(&self) -> Instance {
        let values = self
            .advertiser_values
            .iter()
            .map(|&w| self.slot_weights.iter().map(|&u| w * u).collect())
            .collect();
        Instance::new(values, self.metric.clone(), DiscountModel::NearestNeighbor)
            .expect("factorized tables are validated at construction")
    }
}

/// A partial assignment of advertisers to slots: each advertiser and each
/// slot appears at most once.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Matching {
    pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn new(mut pairs: Vec<(usize, usize)>) -> Result<Self, ModelError> {
        pairs.sort_unstable();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(ModelError::DuplicateAdvertiser(w[0].0));
            }
        }
        let mut slots: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
        slots.sort_unstable();
        for w in slots.windows(2) {
            if w[0] == w[1] {
                return Err(ModelError::DuplicateSlot(w[0]));
            }
        }
        Ok(Matching { pairs })
    }

    pub fn empty() -> Self {
        Matching { pairs: Vec::new() }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The occupied slot set, sorted ascending.
    pub fn occupied_slots(&self) -> Vec<usize> {
        let mut slots: Vec<usize> = self.pairs.iter().map(|&(_, j)| j).collect();
        slots.sort_unstable();
        slots
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<(), ModelError> {
        for &(i, j) in &self.pairs {
            if i >= n || j >= m {
                return Err(ModelError::PairOutOfRange { i, j, n, m });
            }
        }
        Ok(())
    }
}

/// Total discounted welfare of a matching: the sum over matched pairs of
/// `v[i][j]` times the instance's discount of `j` given the occupied set.
pub fn social_welfare(matching: &Matching, instance: &Instance) -> Result<f64, ModelError> {
    matching.validate(instance.n(), instance.m())?;
    let occupied = matching.occupied_slots();
    let mut total = 0.0;
    for &(i, j) in matching.pairs() {
        let delta = discount(instance.model(), j, &occupied, instance.metric())?;
        total += instance.value(i, j) * delta;
    }
    Ok(total)
}

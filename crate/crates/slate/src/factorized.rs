//! Fast allocation for factorized valuations `v[i][j] = w[i] * u[j]`.
//!
//! Both algorithms here pick the slot set before looking at bids, then match
//! bidders to slots greedily: the advertiser with the k-th largest value gets
//! the slot with the k-th largest quality `u_j * min_dist`. The welfare of
//! that assignment is a dot product of two sorted vectors, a monotone
//! symmetric norm of the bid vector, which is what makes the rule monotone
//! and hence priceable.
//!
//! Slot selection comes in two flavors: a greedy scan at a radius drawn from
//! a doubling schedule (adversarial bids), and a surrogate run of the LP
//! pipeline with expected order statistics standing in for bids (stochastic
//! bids).

use crate::model::{FactorizedInstance, Matching, Metric};
use crate::nnlp::{self, NnLpError};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FactorizedError {
    #[error("distribution is invalid: {0}")]
    BadDistribution(String),
    #[error("need at least one sample")]
    NoSamples,
    #[error(transparent)]
    NnLp(#[from] NnLpError),
}

pub fn sorted_desc(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).expect("no NaNs in value vectors"));
    v
}

/// Dot product of the two sorted-descending views, truncated at the length
/// of `z`. Missing weight entries count as zero.
pub fn norm_f(z: &[f64], weights: &[f64]) -> f64 {
    let zs = sorted_desc(z);
    let ws = sorted_desc(weights);
    zs.iter()
        .enumerate()
        .map(|(k, &zv)| zv * ws.get(k).copied().unwrap_or(0.0))
        .sum()
}

/// Per-slot quality of a slot subset: `u_j` times the distance to the
/// nearest other selected slot (1 for a singleton), zero outside the subset.
pub fn quality_vector(slots: &[usize], u: &[f64], metric: &Metric) -> Vec<f64> {
    let mut q = vec![0.0; u.len()];
    for &j in slots {
        let mut min_d = f64::INFINITY;
        for &j2 in slots {
            if j2 != j {
                min_d = min_d.min(metric.dist(j, j2));
            }
        }
        q[j] = u[j] * if min_d.is_finite() { min_d } else { 1.0 };
    }
    q
}

/// A pre-selected slot subset with its quality vector.
#[derive(Clone, Debug)]
pub struct SlotSelection {
    pub slots: Vec<usize>,
    /// Full m-dimensional quality vector; zero outside `slots`.
    pub quality: Vec<f64>,
}

impl SlotSelection {
    pub fn new(mut slots: Vec<usize>, u: &[f64], metric: &Metric) -> Self {
        slots.sort_unstable();
        slots.dedup();
        let quality = quality_vector(&slots, u, metric);
        SlotSelection { slots, quality }
    }

    /// Selected qualities, largest first, slot index as tie-break.
    pub fn ranked_slots(&self) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> =
            self.slots.iter().map(|&j| (j, self.quality[j])).collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        ranked
    }

    /// Selected qualities sorted descending (zeros for ranks past the
    /// selection).
    pub fn qualities_desc(&self) -> Vec<f64> {
        self.ranked_slots().into_iter().map(|(_, q)| q).collect()
    }
}

/// Greedy scan in order of decreasing slot weight (index as tie-break),
/// keeping a slot iff it is at least `r` away from every slot kept so far.
pub fn select_slots_radius(u: &[f64], metric: &Metric, r: f64) -> SlotSelection {
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| u[b].partial_cmp(&u[a]).unwrap().then(a.cmp(&b)));
    let mut picked: Vec<usize> = Vec::new();
    for j in order {
        if picked.iter().all(|&j2| metric.dist(j, j2) >= r) {
            picked.push(j);
        }
    }
    SlotSelection::new(picked, u, metric)
}

/// Matches the k-th highest bid to the k-th highest quality, for
/// `k <= min(#selected, #bidders)`. Bid ties go to the lower advertiser
/// index; quality ties to the lower slot index. The welfare equals
/// `norm_f(quality, bids)` whenever there are at least as many bidders as
/// selected slots.
pub fn greedy_assign(sel: &SlotSelection, bids: &[f64]) -> Matching {
    let mut order: Vec<usize> = (0..bids.len()).collect();
    order.sort_by(|&a, &b| bids[b].partial_cmp(&bids[a]).unwrap().then(a.cmp(&b)));
    let ranked = sel.ranked_slots();
    let pairs: Vec<(usize, usize)> = order
        .iter()
        .zip(ranked.iter())
        .map(|(&i, &(j, _))| (i, j))
        .collect();
    Matching::new(pairs).expect("greedy assignment never repeats a row or slot")
}

fn ceil_log2(x: usize) -> u32 {
    debug_assert!(x >= 1);
    usize::BITS - (x - 1).leading_zeros()
}

/// The radius schedule `1, 1/2, ..., 2^-L` with `L = ceil(log2(m^2))`.
pub fn logm_radii(m: usize) -> Vec<f64> {
    let levels = if m == 0 { 0 } else { ceil_log2(m * m) };
    (0..=levels).map(|l| 0.5f64.powi(l as i32)).collect()
}

#[derive(Clone, Debug)]
pub struct LogmRun {
    pub radius: f64,
    pub selection: SlotSelection,
    pub matching: Matching,
}

pub fn logm_run_at(inst: &FactorizedInstance, radius: f64) -> LogmRun {
    let selection = select_slots_radius(inst.slot_weights(), inst.metric(), radius);
    let matching = greedy_assign(&selection, inst.advertiser_values());
    LogmRun { radius, selection, matching }
}

/// Draws a radius uniformly from the doubling schedule and runs the greedy
/// selection and assignment at it.
pub fn logm_allocate(inst: &FactorizedInstance, rng: &mut impl Rng) -> LogmRun {
    let radii = logm_radii(inst.m());
    let radius = radii[rng.gen_range(0..radii.len())];
    logm_run_at(inst, radius)
}

/// A bid distribution. Supports in all kinds must be non-negative.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueDistribution {
    PointMass { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Discrete { support: Vec<f64>, probs: Vec<f64> },
    Empirical { samples: Vec<f64> },
}

impl ValueDistribution {
    pub fn validate(&self) -> Result<(), FactorizedError> {
        let bad = |msg: &str| Err(FactorizedError::BadDistribution(msg.into()));
        match self {
            ValueDistribution::PointMass { value } => {
                if !value.is_finite() || *value < 0.0 {
                    return bad("point mass must be finite and non-negative");
                }
            }
            ValueDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= *lo && lo <= hi) {
                    return bad("uniform needs 0 <= lo <= hi");
                }
            }
            ValueDistribution::Discrete { support, probs } => {
                if support.len() != probs.len() || support.is_empty() {
                    return bad("discrete support and probabilities must align");
                }
                if support.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return bad("discrete support must be non-negative");
                }
                if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return bad("probabilities must be non-negative");
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad("probabilities must sum to 1");
                }
            }
            ValueDistribution::Empirical { samples } => {
                if samples.is_empty() || samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return bad("empirical samples must be non-empty and non-negative");
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            ValueDistribution::PointMass { value } => *value,
            ValueDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            ValueDistribution::Discrete { support, probs } => {
                let mut target = rng.gen::<f64>();
                for (v, p) in support.iter().zip(probs) {
                    if target < *p {
                        return *v;
                    }
                    target -= p;
                }
                *support.last().expect("validated non-empty support")
            }
            ValueDistribution::Empirical { samples } => samples[rng.gen_range(0..samples.len())],
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ValueDistribution::PointMass { value } => *value,
            ValueDistribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            ValueDistribution::Discrete { support, probs } => {
                support.iter().zip(probs).map(|(v, p)| v * p).sum()
            }
            ValueDistribution::Empirical { samples } => {
                samples.iter().sum::<f64>() / samples.len() as f64
            }
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self, ValueDistribution::PointMass { .. })
    }
}

/// Expected sorted bid profile: entry `k` estimates the mean of the k-th
/// largest draw of one joint sample. Exact for all-point-mass profiles,
/// Monte Carlo otherwise.
pub fn gamma_order_stats(
    dists: &[ValueDistribution],
    samples: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>, FactorizedError> {
    for d in dists {
        d.validate()?;
    }
    if dists.iter().all(ValueDistribution::is_point_mass) {
        let values: Vec<f64> = dists.iter().map(ValueDistribution::mean).collect();
        return Ok(sorted_desc(&values));
    }
    if samples == 0 {
        return Err(FactorizedError::NoSamples);
    }
    let n = dists.len();
    let mut acc = vec![0.0; n];
    let mut draw = vec![0.0; n];
    for _ in 0..samples {
        for (slot, d) in draw.iter_mut().zip(dists) {
            *slot = d.sample(rng);
        }
        draw.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, v) in acc.iter_mut().zip(&draw) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|a| a / samples as f64).collect())
}

/// Factorized instance whose bids are random with known distributions.
#[derive(Clone, Debug)]
pub struct StochasticInstance {
    pub slot_weights: Vec<f64>,
    pub distributions: Vec<ValueDistribution>,
    pub metric: Metric,
}

/// Slot preselection for stochastic bids: the LP pipeline runs on a
/// surrogate instance whose "bids" are the expected order statistics, and the
/// occupied slots of its matching become the selection. The LP is solved once
/// here; sampling a fresh preselection is cheap.
pub struct StochasticPreparation {
    pub gamma: Vec<f64>,
    slot_weights: Vec<f64>,
    metric: Metric,
    pipeline: Option<nnlp::NnLpPipeline>,
}

impl StochasticPreparation {
    pub fn new(
        inst: &StochasticInstance,
        gamma_samples: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, FactorizedError> {
        let gamma = gamma_order_stats(&inst.distributions, gamma_samples, rng)?;
        let surrogate = FactorizedInstance::new(
            inst.slot_weights.clone(),
            gamma.clone(),
            inst.metric.clone(),
        )
        .map_err(|e| FactorizedError::BadDistribution(e.to_string()))?
        .to_instance();
        let pipeline = if inst.slot_weights.len() >= 2 {
            Some(nnlp::NnLpPipeline::prepare(&surrogate)?)
        } else {
            None
        };
        Ok(StochasticPreparation {
            gamma,
            slot_weights: inst.slot_weights.clone(),
            metric: inst.metric.clone(),
            pipeline,
        })
    }

    /// Samples a preselection by rounding the surrogate relaxation once.
    pub fn preselect(&self, rng: &mut impl Rng) -> Result<SlotSelection, FactorizedError> {
        let slots = match &self.pipeline {
            None => {
                if self.slot_weights.is_empty() {
                    Vec::new()
                } else {
                    vec![0]
                }
            }
            Some(pipeline) => {
                let sel = pipeline.rounder().round(rng);
                sel.chosen
                    .iter()
                    .map(|&i| pipeline.gpds.disks[i].tag.1)
                    .collect()
            }
        };
        Ok(SlotSelection::new(slots, &self.slot_weights, &self.metric))
    }
}

/// One-shot stochastic allocation: preselect via the surrogate pipeline,
/// then assign the realized bids greedily.
pub fn stochastic_allocate(
    inst: &StochasticInstance,
    realized_bids: &[f64],
    gamma_samples: usize,
    rng: &mut impl Rng,
) -> Result<Matching, FactorizedError> {
    let prep = StochasticPreparation::new(inst, gamma_samples, rng)?;
    let sel = prep.preselect(rng)?;
    Ok(greedy_assign(&sel, realized_bids))
}

/// Paired estimate of a norm of the sorted-mean vector vs. the mean norm;
/// inputs to the sandwich ratio `mean_of_norm / norm_of_mean`.
#[derive(Clone, Copy, Debug)]
pub struct NormSandwich {
    pub norm_of_mean: f64,
    pub mean_of_norm: f64,
}

pub fn empirical_norm_sandwich<F: Fn(&[f64]) -> f64>(
    dists: &[ValueDistribution],
    norm: F,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<NormSandwich, FactorizedError> {
    for d in dists {
        d.validate()?;
    }
    if samples == 0 {
        return Err(FactorizedError::NoSamples);
    }
    let n = dists.len();
    let mut mean_sorted = vec![0.0; n];
    let mut mean_of_norm = 0.0;
    let mut draw = vec![0.0; n];
    for _ in 0..samples {
        for (slot, d) in draw.iter_mut().zip(dists) {
            *slot = d.sample(rng);
        }
        mean_of_norm += norm(&draw);
        draw.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, v) in mean_sorted.iter_mut().zip(&draw) {
            *a += v;
        }
    }
    for a in mean_sorted.iter_mut() {
        *a /= samples as f64;
    }
    Ok(NormSandwich {
        norm_of_mean: norm(&mean_sorted),
        mean_of_norm: mean_of_norm / samples as f64,
    })
}

/// The sorted-dot norm with a fixed coefficient vector.
pub fn fixed_weights_norm(coefficients: Vec<f64>) -> impl Fn(&[f64]) -> f64 {
    move |w: &[f64]| norm_f(&coefficients, w)
}

/// The allocation-phase objective for a fixed slot subset, as a norm of the
/// bid vector.
pub fn selection_norm(u: &[f64], metric: &Metric, slots: &[usize]) -> impl Fn(&[f64]) -> f64 {
    let quality = quality_vector(slots, u, metric);
    move |w: &[f64]| norm_f(&quality, w)
}

/// The optimal-welfare norm: the max of the selection norms over all slot
/// subsets. Enumerates subsets, so only suitable for small `m`.
pub fn best_selection_norm(u: &[f64], metric: &Metric) -> impl Fn(&[f64]) -> f64 {
    let m = u.len();
    assert!(m <= 16, "subset enumeration over {m} slots is too large");
    let mut tables = Vec::new();
    for mask in 1u32..(1 << m) {
        let slots: Vec<usize> = (0..m).filter(|j| mask >> j & 1 == 1).collect();
        tables.push(quality_vector(&slots, u, metric));
    }
    move |w: &[f64]| {
        tables
            .iter()
            .map(|q| norm_f(q, w))
            .fold(0.0, f64::max)
    }
}

/// The quantity advertiser `advertiser` receives when bidding `bid` against
/// the other entries of `bids`, with the selection fixed: the quality at its
/// bid rank, counting an opponent as ahead on equal bids iff it has a lower
/// index.
pub fn allocation_quantity(
    sel: &SlotSelection,
    bids: &[f64],
    advertiser: usize,
    bid: f64,
) -> f64 {
    let rank = bids
        .iter()
        .enumerate()
        .filter(|&(i, &w)| i != advertiser && (w > bid || (w == bid && i < advertiser)))
        .count();
    sel.qualities_desc().get(rank).copied().unwrap_or(0.0)
}

/// Exact payment for the greedy allocation at the advertiser's submitted
/// bid: `b * q(b)` minus the integral of the quantity step function, taken
/// piece by piece between the other bids.
pub fn factorized_payment(sel: &SlotSelection, bids: &[f64], advertiser: usize) -> f64 {
    let bid = bids[advertiser];
    let quantity_at = |b: f64| allocation_quantity(sel, bids, advertiser, b);
    let mut cuts: Vec<f64> = bids
        .iter()
        .enumerate()
        .filter(|&(i, &w)| i != advertiser && w > 0.0 && w < bid)
        .map(|(_, &w)| w)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut integral = 0.0;
    let mut left = 0.0;
    for edge in cuts.into_iter().chain(std::iter::once(bid)) {
        if edge > left {
            // The quantity is constant on the open interval, so the midpoint
            // sample integrates it exactly.
            integral += quantity_at(0.5 * (left + edge)) * (edge - left);
            left = edge;
        }
    }
    bid * quantity_at(bid) - integral
}

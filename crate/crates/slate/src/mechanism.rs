//! Truthfulness tooling shared across the allocation rules.
//!
//! Every rule here is viewed as single-parameter: one advertiser's bid scales
//! its whole value row (or is its factorized value), and the rule maps a bid
//! to an allocation quantity so that bid times quantity is the realized
//! discounted value. A monotone quantity curve can be priced with the
//! standard payment `p = b q(b) - integral of q from 0 to b`, charged here
//! either exactly (deterministic rules) or from a sampled curve (randomized
//! rules). For randomized rules the quantity is monotone in expectation over
//! the internal coin flips, so the resulting mechanism is truthful in
//! expectation.

use crate::factorized::{allocation_quantity, SlotSelection};
use crate::model::{Instance, ModelError};
use crate::nnlp::{NnLpError, NnLpPipeline};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cell::RefCell;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MechanismError {
    #[error("allocation curve decreases at bid {at} by {drop}, beyond noise")]
    NonMonotoneCurve { at: f64, drop: f64 },
    #[error("bid grid must be strictly increasing and start at 0")]
    BadGrid,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    NnLp(#[from] NnLpError),
}

/// A single-parameter view of an allocation rule.
pub trait AllocationRule {
    /// One realized allocation quantity for the audited advertiser at `bid`.
    /// Deterministic rules ignore the generator.
    fn quantity(&self, bid: f64, rng: &mut dyn RngCore) -> f64;

    fn is_deterministic(&self) -> bool;

    /// Bids of the other advertisers (or other known discontinuities).
    fn breakpoints(&self) -> Vec<f64>;
}

/// Sampled (or exact) expected allocation as a function of the bid.
#[derive(Clone, Debug)]
pub struct ExpectedAllocationCurve {
    pub bids: Vec<f64>,
    pub quantities: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trials: u64,
}

/// The default audit grid: zero, every breakpoint, midpoints between
/// breakpoints, and 32 evenly spaced probes up to `max_bid`.
pub fn default_bid_grid(rule: &dyn AllocationRule, max_bid: f64) -> Vec<f64> {
    let mut grid = vec![0.0];
    let cuts = rule.breakpoints();
    grid.extend(cuts.iter().copied().filter(|&b| b > 0.0 && b <= max_bid));
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if mid > 0.0 && mid <= max_bid {
            grid.push(mid);
        }
    }
    for k in 1..=32 {
        grid.push(max_bid * k as f64 / 32.0);
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    grid
}

fn mix_seed(seed: u64, trial: u64) -> u64 {
    // splitmix64 step keeps per-trial streams decorrelated.
    let mut z = seed.wrapping_add(trial.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Estimates the expected quantity at every grid bid. Randomized rules reuse
/// one seed stream per trial across all bids (common random numbers), which
/// makes adjacent grid points directly comparable. Deterministic rules are
/// evaluated once, exactly.
pub fn expected_allocation_curve(
    rule: &dyn AllocationRule,
    grid: &[f64],
    trials: u64,
    seed: u64,
) -> Result<ExpectedAllocationCurve, MechanismError> {
    if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MechanismError::BadGrid);
    }
    let bids = grid.to_vec();
    if rule.is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let quantities: Vec<f64> = bids.iter().map(|&b| rule.quantity(b, &mut rng)).collect();
        return Ok(ExpectedAllocationCurve {
            stderr: vec![0.0; bids.len()],
            quantities,
            bids,
            trials: 1,
        });
    }
    let mut sums = vec![0.0; bids.len()];
    let mut sq = vec![0.0; bids.len()];
    for t in 0..trials {
        let trial_seed = mix_seed(seed, t);
        for (k, &b) in bids.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let q = rule.quantity(b, &mut rng);
            sums[k] += q;
            sq[k] += q * q;
        }
    }
    let n = trials as f64;
    let quantities: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let stderr: Vec<f64> = quantities
        .iter()
        .zip(&sq)
        .map(|(&mean, &s2)| {
            let var = (s2 / n - mean * mean).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(ExpectedAllocationCurve { bids, quantities, stderr, trials })
}

fn curve_quantity_at(curve: &ExpectedAllocationCurve, bid: f64) -> f64 {
    match curve.bids.binary_search_by(|b| b.partial_cmp(&bid).unwrap()) {
        Ok(k) => curve.quantities[k],
        Err(0) => curve.quantities[0],
        Err(k) if k == curve.bids.len() => *curve.quantities.last().unwrap(),
        Err(k) => {
            let (b0, b1) = (curve.bids[k - 1], curve.bids[k]);
            let (q0, q1) = (curve.quantities[k - 1], curve.quantities[k]);
            q0 + (q1 - q0) * (bid - b0) / (b1 - b0)
        }
    }
}

/// Payment at `bid` from a sampled curve: `b q(b)` minus the trapezoidal
/// integral of the curve from zero. Rejects curves that decrease by more than
/// three standard errors anywhere at or below the bid.
pub fn myerson_payment_from_curve(
    curve: &ExpectedAllocationCurve,
    bid: f64,
) -> Result<f64, MechanismError> {
    for k in 1..curve.bids.len() {
        if curve.bids[k - 1] > bid {
            break;
        }
        let drop = curve.quantities[k - 1] - curve.quantities[k];
        let noise = 3.0 * (curve.stderr[k - 1].powi(2) + curve.stderr[k].powi(2)).sqrt();
        if drop > noise + 1e-12 {
            return Err(MechanismError::NonMonotoneCurve { at: curve.bids[k], drop });
        }
    }
    let mut integral = 0.0;
    // Constant extension from zero to the first grid point.
    if curve.bids[0] > 0.0 {
        integral += curve.quantities[0] * curve.bids[0].min(bid);
    }
    for k in 1..curve.bids.len() {
        let (b0, b1) = (curve.bids[k - 1], curve.bids[k]);
        if b0 >= bid {
            break;
        }
        let hi = b1.min(bid);
        let q0 = curve.quantities[k - 1];
        let q1 = curve_quantity_at(curve, hi);
        integral += 0.5 * (q0 + q1) * (hi - b0);
    }
    if bid > *curve.bids.last().unwrap() {
        integral += curve_quantity_at(curve, bid) * (bid - curve.bids.last().unwrap());
    }
    Ok(bid * curve_quantity_at(curve, bid) - integral)
}

#[derive(Clone, Debug)]
pub struct ProbeViolation {
    pub low_bid: f64,
    pub high_bid: f64,
    pub low_quantity: f64,
    pub high_quantity: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ProbeReport {
    pub checked: usize,
    pub violations: Vec<ProbeViolation>,
}

/// Checks `q(b) <= q(b')` for each probed pair `b < b'`. Deterministic rules
/// are compared exactly; randomized rules compare paired means under common
/// random numbers, flagging drops beyond three standard errors of the paired
/// difference.
pub fn monotonicity_probe(
    rule: &dyn AllocationRule,
    bid_pairs: &[(f64, f64)],
    trials: u64,
    seed: u64,
) -> ProbeReport {
    let mut report = ProbeReport::default();
    for &(low, high) in bid_pairs {
        let (low, high) = if low <= high { (low, high) } else { (high, low) };
        report.checked += 1;
        if rule.is_deterministic() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ql = rule.quantity(low, &mut rng);
            let qh = rule.quantity(high, &mut rng);
            if ql > qh + 1e-12 {
                report.violations.push(ProbeViolation {
                    low_bid: low,
                    high_bid: high,
                    low_quantity: ql,
                    high_quantity: qh,
                });
            }
            continue;
        }
        let mut diff_sum = 0.0;
        let mut diff_sq = 0.0;
        let mut low_sum = 0.0;
        for t in 0..trials {
            let trial_seed = mix_seed(seed, t);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let ql = rule.quantity(low, &mut rng);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let qh = rule.quantity(high, &mut rng);
            let d = qh - ql;
            diff_sum += d;
            diff_sq += d * d;
            low_sum += ql;
        }
        let n = trials as f64;
        let mean = diff_sum / n;
        let var = (diff_sq / n - mean * mean).max(0.0);
        let se = (var / n).sqrt();
        if mean < -3.0 * se - 1e-12 {
            report.violations.push(ProbeViolation {
                low_bid: low,
                high_bid: high,
                low_quantity: low_sum / n,
                high_quantity: low_sum / n + mean,
            });
        }
    }
    report
}

/// Greedy factorized assignment with the slot set fixed: the audited
/// advertiser's quantity is the quality at its bid rank.
pub struct GreedyFactorizedRule {
    pub selection: SlotSelection,
    pub bids: Vec<f64>,
    pub advertiser: usize,
}

impl AllocationRule for GreedyFactorizedRule {
    fn quantity(&self, bid: f64, _rng: &mut dyn RngCore) -> f64 {
        allocation_quantity(&self.selection, &self.bids, self.advertiser, bid)
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut cuts: Vec<f64> = self
            .bids
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.advertiser)
            .map(|(_, &b)| b)
            .collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        cuts
    }
}

/// Returns a copy of the instance with one advertiser's value row scaled.
pub fn scale_row(instance: &Instance, advertiser: usize, factor: f64) -> Instance {
    let mut values = instance.values().to_vec();
    for v in values[advertiser].iter_mut() {
        *v *= factor;
    }
    Instance::new(values, instance.metric().clone(), instance.model())
        .expect("scaling a valid row keeps it valid")
}

/// The single-slot rule as a single-parameter auction: the audited
/// advertiser's bid scales its best cell against the best competing cell.
pub struct SingleSlotScaleRule {
    base_cell: f64,
    best_slot: usize,
    advertiser: usize,
    competitor_best: f64,
    competitor_wins_ties: bool,
}

impl SingleSlotScaleRule {
    pub fn new(base: &Instance, advertiser: usize) -> Self {
        let mut best_slot = 0;
        for j in 1..base.m() {
            if base.value(advertiser, j) > base.value(advertiser, best_slot) {
                best_slot = j;
            }
        }
        let mut competitor_best = 0.0;
        let mut competitor_pos = (usize::MAX, usize::MAX);
        for i in 0..base.n() {
            if i == advertiser {
                continue;
            }
            for j in 0..base.m() {
                if base.value(i, j) > competitor_best {
                    competitor_best = base.value(i, j);
                    competitor_pos = (i, j);
                }
            }
        }
        // On an exact tie the baseline keeps the lexicographically first cell.
        let competitor_wins_ties = competitor_pos < (advertiser, best_slot);
        SingleSlotScaleRule {
            base_cell: base.value(advertiser, best_slot),
            best_slot,
            advertiser,
            competitor_best,
            competitor_wins_ties,
        }
    }

    pub fn winning_slot(&self) -> usize {
        self.best_slot
    }

    pub fn advertiser(&self) -> usize {
        self.advertiser
    }
}

impl AllocationRule for SingleSlotScaleRule {
    fn quantity(&self, bid: f64, _rng: &mut dyn RngCore) -> f64 {
        let mine = bid * self.base_cell;
        let wins = if self.competitor_wins_ties {
            mine > self.competitor_best
        } else {
            mine >= self.competitor_best
        };
        if wins {
            self.base_cell
        } else {
            0.0
        }
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn breakpoints(&self) -> Vec<f64> {
        if self.base_cell > 0.0 {
            vec![self.competitor_best / self.base_cell]
        } else {
            Vec::new()
        }
    }
}

/// The LP pipeline as a randomized single-parameter rule. The pipeline for
/// each probed bid is prepared once and cached; per-call work is one
/// rounding. Quantities use the virtual conversion, where a chosen disk for
/// the audited advertiser contributes exactly half its base weight.
pub struct LpMechanismRule {
    base: Instance,
    advertiser: usize,
    cache: RefCell<HashMap<u64, NnLpPipeline>>,
}

impl LpMechanismRule {
    pub fn new(base: Instance, advertiser: usize) -> Self {
        LpMechanismRule { base, advertiser, cache: RefCell::new(HashMap::new()) }
    }

    fn with_pipeline<T>(&self, bid: f64, f: impl FnOnce(&NnLpPipeline) -> T) -> T {
        let key = bid.to_bits();
        let mut cache = self.cache.borrow_mut();
        let pipeline = cache.entry(key).or_insert_with(|| {
            NnLpPipeline::prepare(&scale_row(&self.base, self.advertiser, bid))
                .expect("scaled instance stays well-formed")
        });
        f(pipeline)
    }

    /// LP objective of the scaled instance; exactly 18 times the expected
    /// virtual-mode welfare.
    pub fn lp_objective(&self, bid: f64) -> f64 {
        self.with_pipeline(bid, |p| p.lp_objective())
    }

    /// Exact expected quantity: each disk of the audited group is admitted
    /// with probability `x*/9` and contributes half its base weight per unit
    /// of bid.
    pub fn expected_quantity(&self, bid: f64) -> f64 {
        self.with_pipeline(bid, |p| {
            p.gpds
                .groups
                .get(self.advertiser)
                .map(|group| {
                    group
                        .iter()
                        .map(|&d| {
                            let disk = &p.gpds.disks[d];
                            let (i, j, j2) = disk.tag;
                            let base_weight =
                                self.base.value(i, j) * self.base.metric().dist(j, j2);
                            p.relaxation.xstar[d] / 9.0 * base_weight / 2.0
                        })
                        .sum()
                })
                .unwrap_or(0.0)
        })
    }
}

impl AllocationRule for LpMechanismRule {
    fn quantity(&self, bid: f64, rng: &mut dyn RngCore) -> f64 {
        self.with_pipeline(bid, |p| {
            let sel = p.rounder().round(&mut *rng);
            sel.chosen
                .iter()
                .filter(|&&d| p.gpds.disks[d].tag.0 == self.advertiser)
                .map(|&d| {
                    let (i, j, j2) = p.gpds.disks[d].tag;
                    self.base.value(i, j) * self.base.metric().dist(j, j2) / 2.0
                })
                .sum()
        })
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Checks that the LP objective never drops as one advertiser's row scales
/// up. Returns the factor pairs where it does.
pub fn lp_objective_monotonicity(
    instance: &Instance,
    advertiser: usize,
    factors: &[f64],
) -> Result<Vec<(f64, f64)>, MechanismError> {
    let mut violations = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &t in factors {
        let pipeline = NnLpPipeline::prepare(&scale_row(instance, advertiser, t))?;
        let obj = pipeline.lp_objective();
        if let Some((pt, pobj)) = prev {
            if obj < pobj - 1e-6 {
                violations.push((pt, t));
            }
        }
        prev = Some((t, obj));
    }
    Ok(violations)
}

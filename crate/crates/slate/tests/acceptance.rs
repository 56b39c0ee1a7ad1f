//! Acceptance suite: every guarantee the library claims, checked end to end
//! against brute-force oracles and closed-form identities at desk scale.
//! Each test prints one PASS line with its headline numbers.
//!
//! Tolerances are pinned here, next to the check that uses them, and do not
//! depend on runtime calibration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slate::factorized::{
    self, best_selection_norm, empirical_norm_sandwich, fixed_weights_norm, greedy_assign,
    logm_radii, logm_run_at, norm_f, quality_vector, select_slots_radius, selection_norm,
    StochasticInstance, StochasticPreparation,
};
use slate::harness;
use slate::mechanism::lp_objective_monotonicity;
use slate::model::{
    social_welfare, DiscountModel, FactorizedInstance, Instance, Matching, Point,
};
use slate::nnlp::{
    selection_to_matching, ConversionMode, GpdsConstraint, NnLpPipeline,
};
use slate::oracle;
use slate::proddist::{
    hardness_demo, mis_to_pd_instance, msed_objective, pd_matching_to_msed_subset,
    refine_to_independent_set, single_slot_baseline,
};
use slate::ptas::{
    boundary_bound, build_grid_hierarchy, ptas_allocate, ptas_wds_at_offset, reduce_nn_to_wds,
    same_level_bound, Disk, DEFAULT_WORK_CAP,
};
use std::time::Instant;

/// Random nearest-neighbor instance mixing Euclidean and shortest-path
/// metrics.
fn random_nn_instance(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Instance {
    let metric = if rng.gen_bool(0.5) {
        harness::gen_euclidean(m, 1.0, rng).1
    } else {
        harness::gen_random_metric(m, rng)
    };
    let values: Vec<Vec<f64>> =
        (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
    Instance::new(values, metric, DiscountModel::NearestNeighbor).unwrap()
}

/// Criterion 1: the rounding admits every disk with probability x*/9.
/// 20 instances, 200k seeded trials each, absolute tolerance 0.01.
#[test]
fn criterion_01_rounding_probability_identity() {
    const TRIALS: u64 = 200_000;
    const ABS_TOL: f64 = 0.01;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(2..=4);
        let inst = random_nn_instance(n, m, &mut rng);
        let pipeline = NnLpPipeline::prepare(&inst).unwrap();
        let rounder = pipeline.rounder();
        let disks = pipeline.gpds.disks.len();
        let mut hits = vec![0u64; disks];
        for _ in 0..TRIALS {
            for &i in &rounder.round(&mut rng).chosen {
                hits[i] += 1;
            }
        }
        for (i, &h) in hits.iter().enumerate() {
            let freq = h as f64 / TRIALS as f64;
            let target = pipeline.relaxation.xstar[i] / 9.0;
            let gap = (freq - target).abs();
            worst = worst.max(gap);
            assert!(
                gap <= ABS_TOL,
                "case {case}, disk {i}: frequency {freq} vs x*/9 = {target}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}, limit 2 min");
    println!(
        "criterion 01 (rounding probability identity): PASS — worst |freq - x*/9| = {worst:.5} <= {ABS_TOL} over 20 instances x {TRIALS} trials, {elapsed:?}"
    );
}

/// Criterion 2: expected welfare of the full pipeline in virtual mode is
/// LP/18, which is at least OPT/18. 200 instances, 10k trials each.
///
/// The identity is asserted within 2% relative on the per-trial
/// conditional-mean welfare estimate (same expectation as the sample mean,
/// far lower variance). The OPT/18 floor holds with equality whenever the
/// relaxation is tight (LP = OPT, which does happen, e.g. on two-slot
/// layouts), so no unbiased finite-sample mean can sit above it on every
/// such instance; the floor is therefore asserted exactly at the
/// expectation level (LP >= OPT) and at three standard errors on the
/// sampled means.
#[test]
fn criterion_02_eighteen_approximation() {
    const TRIALS: usize = 10_000;
    const REL_TOL: f64 = 0.02;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let mut worst_rel = 0.0f64;
    let mut worst_floor_z = f64::INFINITY;
    let mut tight_cases = 0u32;
    for case in 0..200 {
        let n = rng.gen_range(2..=5);
        let m = rng.gen_range(2..=6);
        let inst = random_nn_instance(n, m, &mut rng);
        let opt = oracle::optimal_allocation(&inst).unwrap().value;
        let pipeline = NnLpPipeline::prepare(&inst).unwrap();
        let rounder = pipeline.rounder();
        let target = pipeline.lp_objective() / 18.0;
        let mut welfare_sum = 0.0;
        let mut welfare_sq = 0.0;
        let mut estimate_sum = 0.0;
        for _ in 0..TRIALS {
            let trial = rounder.round_trial(&mut rng);
            let conv = selection_to_matching(
                &pipeline.gpds,
                &trial.selection,
                &inst,
                ConversionMode::Virtual,
            )
            .unwrap();
            // The virtual conversion halves the selection value exactly.
            assert!((conv.welfare - trial.selection.value / 2.0).abs() <= 1e-9);
            welfare_sum += conv.welfare;
            welfare_sq += conv.welfare * conv.welfare;
            estimate_sum += trial.value_estimate / 2.0;
        }
        let mean_welfare = welfare_sum / TRIALS as f64;
        let mean_estimate = estimate_sum / TRIALS as f64;
        let stderr = ((welfare_sq / TRIALS as f64 - mean_welfare * mean_welfare).max(0.0)
            / TRIALS as f64)
            .sqrt();
        let rel = (mean_estimate - target).abs() / target;
        worst_rel = worst_rel.max(rel);
        assert!(
            rel <= REL_TOL,
            "case {case}: conditional-mean welfare {mean_estimate} vs LP/18 = {target}"
        );
        // Exact floor: E[SW] = LP/18 and LP >= OPT.
        assert!(
            pipeline.lp_objective() >= opt - 1e-9,
            "case {case}: LP {} below OPT {opt}",
            pipeline.lp_objective()
        );
        let floor = opt / 18.0;
        if (pipeline.lp_objective() - opt).abs() <= 1e-9 * opt.max(1.0) {
            tight_cases += 1;
        }
        let z = (mean_welfare - floor) / stderr.max(1e-300);
        worst_floor_z = worst_floor_z.min(z);
        assert!(
            mean_welfare + 3.0 * stderr >= floor,
            "case {case}: mean welfare {mean_welfare} (stderr {stderr}) below OPT/18 = {floor}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 600, "took {elapsed:?}, limit 10 min");
    println!(
        "criterion 02 (18-approximation): PASS — worst relative gap to LP/18 = {worst_rel:.4} <= {REL_TOL}; LP >= OPT exactly on all 200 instances ({tight_cases} tight); min floor z-score {worst_floor_z:.2} (>= -3) over {TRIALS} trials, {elapsed:?}"
    );
}

/// Criterion 3: the relaxation dominates the exact disjoint-coverage
/// optimum on 500 random grouped-disk instances with at most 12 disks.
#[test]
fn criterion_03_lp_relaxation_validity() {
    const TOL: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut min_slack = f64::INFINITY;
    for case in 0..500 {
        let disks = rng.gen_range(1..=12);
        let groups = rng.gen_range(1..=4);
        let points = rng.gen_range(2..=5);
        let gpds = harness::gen_gpds(disks, groups, points, &mut rng);
        let lp = slate::nnlp::solve_lp_relax(&gpds).unwrap();
        let exact = oracle::optimal_gpds(&gpds, GpdsConstraint::DisjointCoverage, 22).unwrap();
        min_slack = min_slack.min(lp.objective - exact.value);
        assert!(
            lp.objective >= exact.value - TOL,
            "case {case}: LP {} below exact {}",
            lp.objective,
            exact.value
        );
    }
    println!(
        "criterion 03 (LP relaxation validity): PASS — LP >= exact coverage optimum on 500 instances (min slack {min_slack:.2e}, tolerance {TOL:.0e})"
    );
}

/// Criterion 4: rounded selections always satisfy the center-coverage
/// constraint and take at most one disk per group. The rounding path asserts
/// this on every draw in criteria 1 and 2; this test re-verifies a fresh
/// batch with external checks.
#[test]
fn criterion_04_constraint_feasibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut checked = 0u64;
    for _ in 0..20 {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(2..=5);
        let inst = random_nn_instance(n, m, &mut rng);
        let pipeline = NnLpPipeline::prepare(&inst).unwrap();
        let rounder = pipeline.rounder();
        let group_of = pipeline.gpds.group_of();
        for _ in 0..2_000 {
            let sel = rounder.round(&mut rng);
            assert!(pipeline.gpds.selection_is_center_free(&sel.chosen));
            let mut groups_used: Vec<usize> = sel.chosen.iter().map(|&i| group_of[i]).collect();
            groups_used.sort_unstable();
            groups_used.dedup();
            assert_eq!(groups_used.len(), sel.chosen.len(), "group used twice");
            checked += 1;
        }
    }
    println!(
        "criterion 04 (constraint-feasible rounding): PASS — zero violations over {checked} fresh selections plus every draw in criteria 01/02"
    );
}

/// Criterion 5: averaging the greedy radius schedule beats OPT / (4 (L+1))
/// on every instance, and the small-radius edge-case inequality holds for
/// the partition of any occupied set.
#[test]
fn criterion_05_radius_schedule_guarantee() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let mut worst_ratio = f64::INFINITY;
    for case in 0..200 {
        let m = rng.gen_range(1..=6);
        let n = rng.gen_range(1..=6);
        let fact = harness::gen_factorized(n, m, &mut rng);
        let dense = fact.to_instance();
        let opt = oracle::optimal_allocation(&dense).unwrap().value;
        let radii = logm_radii(m);
        let levels = radii.len();
        let mut total = 0.0;
        for &r in &radii {
            let run = logm_run_at(&fact, r);
            total += social_welfare(&run.matching, &dense).unwrap();
        }
        let average = total / levels as f64;
        let floor = opt / (4.0 * levels as f64);
        if opt > 0.0 {
            worst_ratio = worst_ratio.min(average / floor);
        }
        assert!(
            average >= floor - 1e-9,
            "case {case}: schedule average {average} below OPT/(4(L+1)) = {floor}"
        );

        // Edge-case inequality for the partition of an occupied set S:
        // f(U(S_L)) 2^{-L+1} <= 4 f(Z(S~_0)).
        let l_max = levels - 1;
        let best_occupied = oracle::optimal_allocation(&dense).unwrap().best.occupied_slots();
        let mut subsets: Vec<Vec<usize>> = vec![best_occupied];
        for _ in 0..3 {
            let s: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
            if !s.is_empty() {
                subsets.push(s);
            }
        }
        let u = fact.slot_weights();
        let w = fact.advertiser_values();
        let tail_scale = 0.5f64.powi(l_max as i32 - 1);
        let first_selection = select_slots_radius(u, fact.metric(), 1.0);
        let anchor = norm_f(&first_selection.quality, w);
        for s in subsets {
            if s.is_empty() {
                continue;
            }
            let mut tail: Vec<usize> = Vec::new();
            for &j in &s {
                let mut min_d = f64::INFINITY;
                for &j2 in &s {
                    if j2 != j {
                        min_d = min_d.min(fact.metric().dist(j, j2));
                    }
                }
                let min_d = if min_d.is_finite() { min_d } else { 1.0 };
                // Buckets l = 1..l_max hold (2^-l, 2^-(l-1)]; the rest is the tail.
                let in_bucket = (1..l_max).any(|l| {
                    min_d > 0.5f64.powi(l as i32) && min_d <= 0.5f64.powi(l as i32 - 1)
                });
                if !in_bucket {
                    tail.push(j);
                }
            }
            let mut masked = vec![0.0; m];
            for &j in &tail {
                masked[j] = u[j];
            }
            let lhs = norm_f(&masked, w) * tail_scale;
            assert!(
                lhs <= 4.0 * anchor + 1e-9,
                "case {case}: edge-case bound {lhs} > 4 x {anchor}"
            );
        }
    }
    println!(
        "criterion 05 (radius schedule guarantee): PASS — min average/(OPT/(4(L+1))) = {worst_ratio:.3} over 200 instances; edge-case bound held on every partition"
    );
}

/// Criterion 6: the sorted-dot objective is a monotone symmetric norm:
/// 10,000 randomized checks of symmetry, monotonicity, homogeneity (1e-12
/// relative) and the triangle inequality, for both the fixed-weight form and
/// the slot-selection form.
#[test]
fn criterion_06_norm_axioms() {
    const ROUNDS: usize = 1_250; // 8 checks per round = 10,000 checks
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    let mut checks = 0u64;
    for _ in 0..ROUNDS {
        let dim = rng.gen_range(1..=6);
        let weights: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        let m = rng.gen_range(1..=5);
        let metric = harness::gen_random_metric(m, &mut rng);
        let u: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        let slots: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.6)).collect();
        let quality = quality_vector(&slots, &u, &metric);

        for (z_dim, coefs) in [(dim, &weights), (m, &quality)] {
            let z: Vec<f64> = (0..z_dim).map(|_| rng.gen::<f64>()).collect();
            let y: Vec<f64> = (0..z_dim).map(|_| rng.gen::<f64>()).collect();
            let eval = |v: &[f64]| norm_f(coefs, v);

            // Symmetry: shuffling inputs changes nothing (exactly).
            let mut shuffled = z.clone();
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.gen_range(0..=i));
            }
            assert_eq!(eval(&z), eval(&shuffled), "symmetry violated");
            checks += 1;

            // Monotonicity: a coordinate bump never lowers the norm.
            let mut bumped = z.clone();
            let at = rng.gen_range(0..bumped.len());
            bumped[at] += rng.gen::<f64>();
            assert!(eval(&bumped) >= eval(&z), "monotonicity violated");
            checks += 1;

            // Absolute homogeneity to 1e-12 relative.
            let alpha = 2.0 * rng.gen::<f64>();
            let scaled: Vec<f64> = z.iter().map(|v| alpha * v).collect();
            let lhs = eval(&scaled);
            let rhs = alpha * eval(&z);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0),
                "homogeneity violated: {lhs} vs {rhs}"
            );
            checks += 1;

            // Triangle inequality.
            let sum: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a + b).collect();
            assert!(
                eval(&sum) <= eval(&z) + eval(&y) + 1e-12,
                "triangle inequality violated"
            );
            checks += 1;
        }
    }
    println!("criterion 06 (norm axioms): PASS — {checks} randomized checks, zero failures");
}

/// Criterion 7: for product-distributed bids the mean norm sits between the
/// norm of the sorted means and 28 times it. 50 profiles, three norm shapes,
/// 100k samples; Monte Carlo floor 1 - 0.02.
#[test]
fn criterion_07_norm_sandwich() {
    const SAMPLES: usize = 100_000;
    const LO: f64 = 1.0 - 0.02;
    const HI: f64 = 28.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut max_ratio = 0.0f64;
    for case in 0..50 {
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=4);
        let dists = harness::gen_distribution_profile(n, &mut rng);
        let metric = harness::gen_random_metric(m, &mut rng);
        let u: Vec<f64> = (0..m).map(|_| 0.2 + 0.8 * rng.gen::<f64>()).collect();
        let slots: Vec<usize> = (0..m).collect();
        let coefs: Vec<f64> = (0..n).map(|_| 0.2 + 0.8 * rng.gen::<f64>()).collect();
        let norms: Vec<(&str, Box<dyn Fn(&[f64]) -> f64>)> = vec![
            ("fixed", Box::new(fixed_weights_norm(coefs))),
            ("selection", Box::new(selection_norm(&u, &metric, &slots))),
            ("best-selection", Box::new(best_selection_norm(&u, &metric))),
        ];
        for (name, norm) in norms {
            let s = empirical_norm_sandwich(&dists, &*norm, SAMPLES, &mut rng).unwrap();
            if s.norm_of_mean == 0.0 {
                assert!(s.mean_of_norm.abs() < 1e-9);
                continue;
            }
            let ratio = s.mean_of_norm / s.norm_of_mean;
            max_ratio = max_ratio.max(ratio);
            assert!(
                (LO..=HI).contains(&ratio),
                "case {case} norm {name}: ratio {ratio} outside [{LO}, {HI}]"
            );
        }
    }
    println!(
        "criterion 07 (28-factor sandwich): PASS — ratios within [{LO}, {HI}] over 50 profiles x 3 norms (max seen {max_ratio:.3})"
    );
}

/// Criterion 8: the stochastic preselection plus greedy assignment clears
/// E[OPT]/504 over 50 distribution profiles, both sides Monte Carlo at 10k
/// draws.
#[test]
fn criterion_08_stochastic_constant_factor() {
    const DRAWS: usize = 10_000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    let mut min_ratio = f64::INFINITY;
    for case in 0..50 {
        let n = rng.gen_range(2..=5);
        let m = rng.gen_range(1..=5);
        let inst = StochasticInstance {
            slot_weights: (0..m).map(|_| rng.gen::<f64>()).collect(),
            distributions: harness::gen_distribution_profile(n, &mut rng),
            metric: harness::gen_random_metric(m, &mut rng),
        };
        let prep = StochasticPreparation::new(&inst, 20_000, &mut rng).unwrap();
        let mut alg_sum = 0.0;
        let mut opt_sum = 0.0;
        for _ in 0..DRAWS {
            let bids: Vec<f64> = inst.distributions.iter().map(|d| d.sample(&mut rng)).collect();
            let sel = prep.preselect(&mut rng).unwrap();
            let matching = greedy_assign(&sel, &bids);
            let dense = FactorizedInstance::new(
                inst.slot_weights.clone(),
                bids.clone(),
                inst.metric.clone(),
            )
            .unwrap()
            .to_instance();
            alg_sum += social_welfare(&matching, &dense).unwrap();
            opt_sum += oracle::optimal_allocation(&dense).unwrap().value;
        }
        let ratio = if opt_sum > 0.0 { alg_sum / opt_sum } else { 1.0 };
        min_ratio = min_ratio.min(ratio);
        assert!(
            alg_sum >= opt_sum / 504.0,
            "case {case}: E[alg] = {} below E[OPT]/504 = {}",
            alg_sum / DRAWS as f64,
            opt_sum / DRAWS as f64 / 504.0
        );
    }
    let elapsed = start.elapsed();
    println!(
        "criterion 08 (stochastic 504-approximation): PASS — min E[alg]/E[OPT] = {min_ratio:.3} (bound 1/504 = {:.4}) over 50 profiles x {DRAWS} draws, {elapsed:?}",
        1.0 / 504.0
    );
}

/// Criterion 9: the shifted-grid scheme clears (1-eps)^3 OPT on every 2D
/// unit-value instance, and the dynamic program equals the survivor-restricted
/// exact optimum on small disk sets.
#[test]
fn criterion_09_ptas_guarantee() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
    let mut worst_ratio = f64::INFINITY;
    let mut equality_checks = 0u64;
    for case in 0..100 {
        let m = rng.gen_range(2..=6);
        let eps = if case % 2 == 0 { 0.5 - 1e-12 } else { 1.0 / 3.0 };
        let points: Vec<Point> = (0..m)
            .map(|_| Point::new(rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();
        let u: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        let run = ptas_allocate(&points, &u, m, eps, DEFAULT_WORK_CAP).unwrap();
        let opt = oracle::optimal_allocation(&run.instance).unwrap().value;
        let floor = (1.0 - eps).powi(3) * opt;
        if opt > 0.0 {
            worst_ratio = worst_ratio.min(run.welfare / opt);
        }
        assert!(
            run.welfare >= floor - 1e-9,
            "case {case}: welfare {} below (1-eps)^3 OPT = {floor}",
            run.welfare
        );

        // Exact DP equivalence on survivor sets of at most 12 disks.
        let (pts, _) = slate::model::normalize_points(&points);
        let wds = reduce_nn_to_wds(&pts, &u, m, eps).unwrap();
        if wds.disks.len() <= 12 {
            let k = (1.0 / eps + 1e-9).floor() as usize;
            for alpha in 0..k {
                for beta in 0..k {
                    let grid = build_grid_hierarchy(&wds, eps, alpha, beta).unwrap();
                    let survivors: Vec<Disk> = grid
                        .survivors()
                        .iter()
                        .map(|&i| wds.disks[i].clone())
                        .collect();
                    let exact = oracle::optimal_wds(&survivors, wds.budget, 22).unwrap();
                    let dp = ptas_wds_at_offset(&wds, eps, alpha, beta, DEFAULT_WORK_CAP)
                        .unwrap();
                    assert!(
                        (dp.value - exact.value).abs() <= 1e-9,
                        "case {case} offset ({alpha},{beta}): dp {} vs exact {}",
                        dp.value,
                        exact.value
                    );
                    equality_checks += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 900, "took {elapsed:?}, limit 15 min");
    println!(
        "criterion 09 (near-optimal 2D scheme): PASS — worst welfare/OPT = {worst_ratio:.3} over 100 instances (floors (1-eps)^3), {equality_checks} exact DP-vs-oracle equalities, {elapsed:?}"
    );
}

/// Criterion 10: the packing bounds on boundary sets and same-level sets
/// hold throughout the dynamic program (they are also hard asserts inside
/// it). Verified over a fresh batch with the observed maxima reported.
#[test]
fn criterion_10_cardinality_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xCA);
    let mut max_boundary = 0usize;
    let mut max_same_level = 0usize;
    let mut k_used = 0usize;
    for case in 0..40 {
        let m = rng.gen_range(2..=6);
        let eps = if case % 2 == 0 { 0.5 - 1e-12 } else { 1.0 / 3.0 };
        let points: Vec<Point> = (0..m)
            .map(|_| Point::new(rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();
        let (pts, _) = slate::model::normalize_points(&points);
        let u: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        let wds = reduce_nn_to_wds(&pts, &u, m, eps).unwrap();
        let k = (1.0 / eps + 1e-9).floor() as usize;
        k_used = k_used.max(k);
        for alpha in 0..k {
            for beta in 0..k {
                let run = ptas_wds_at_offset(&wds, eps, alpha, beta, DEFAULT_WORK_CAP).unwrap();
                assert!(
                    (run.max_boundary as f64) <= boundary_bound(k),
                    "boundary set of {} exceeds bound {}",
                    run.max_boundary,
                    boundary_bound(k)
                );
                assert!(
                    (run.max_same_level as f64) <= same_level_bound(k),
                    "same-level set of {} exceeds bound {}",
                    run.max_same_level,
                    same_level_bound(k)
                );
                max_boundary = max_boundary.max(run.max_boundary);
                max_same_level = max_same_level.max(run.max_same_level);
            }
        }
    }
    println!(
        "criterion 10 (packing cardinality bounds): PASS — max boundary {max_boundary} <= {:.1}, max same-level {max_same_level} <= {:.1}, zero assertion failures",
        boundary_bound(k_used),
        same_level_bound(k_used)
    );
}

/// Criterion 11: the hardness chain is executable. On instances built from
/// graphs: welfare equals rho exactly on random matchings, refinement never
/// lowers rho and outputs an independent set, and the exact allocator
/// recovers the exact maximum independent set through the chain.
#[test]
fn criterion_11_hardness_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xCB);
    let mut identity_checks = 0u64;
    for case in 0..100 {
        let v = rng.gen_range(1..=12);
        let p = [0.2, 0.4, 0.6][case % 3];
        let graph = harness::gen_graph(v, p, &mut rng);
        let inst = mis_to_pd_instance(&graph).unwrap();

        // (a) welfare = rho on random matchings, exactly.
        for _ in 0..10 {
            let k = rng.gen_range(0..=v);
            let mut slots: Vec<usize> = (0..v).collect();
            for i in (1..slots.len()).rev() {
                slots.swap(i, rng.gen_range(0..=i));
            }
            let pairs: Vec<(usize, usize)> =
                slots.iter().take(k).enumerate().map(|(i, &j)| (i, j)).collect();
            let matching = Matching::new(pairs).unwrap();
            pd_matching_to_msed_subset(&matching, &graph, &inst).unwrap();
            identity_checks += 1;
        }

        // (b) refinement of random subsets: monotone per step (asserted
        // inside) and independent at the end.
        for _ in 0..5 {
            let subset: Vec<usize> = (0..v).filter(|_| rng.gen_bool(0.6)).collect();
            let rho_before = msed_objective(&graph, &subset).unwrap();
            let refined = refine_to_independent_set(&graph, &subset);
            let rho_after = msed_objective(&graph, &refined).unwrap();
            assert!(rho_after >= rho_before);
            assert_eq!(rho_after, refined.len() as f64, "refined set is not independent");
            for (ai, &a) in refined.iter().enumerate() {
                for &b in &refined[ai + 1..] {
                    assert!(!graph.has_edge(a, b), "internal edge after refinement");
                }
            }
        }

        // (c) the exact allocator recovers the exact MIS size.
        let report = hardness_demo(&graph, |inst| {
            oracle::optimal_allocation(inst).map(|r| r.best)
        })
        .unwrap();
        assert_eq!(
            report.independent_set_size, report.exact_mis_size,
            "case {case}: refined size {} vs MIS {}",
            report.independent_set_size, report.exact_mis_size
        );
    }
    println!(
        "criterion 11 (hardness chain): PASS — {identity_checks} exact welfare = rho identities, refinement sound, oracle allocator recovered the exact MIS on 100 graphs"
    );
}

/// Criterion 12: truthfulness audits. The greedy factorized allocation and
/// the single-slot baseline admit no profitable deviation across their
/// breakpoint grids (exact arithmetic), and the relaxation objective is
/// monotone under single-bid raises.
#[test]
fn criterion_12_truthfulness_audits() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xCC);

    // (a) Greedy factorized allocation with the slot set fixed.
    let mut deviation_checks = 0u64;
    for _ in 0..100 {
        let m = rng.gen_range(1..=5);
        let n = rng.gen_range(2..=5);
        let fact = harness::gen_factorized(n, m, &mut rng);
        let radii = logm_radii(m);
        let radius = radii[rng.gen_range(0..radii.len())];
        let sel = select_slots_radius(fact.slot_weights(), fact.metric(), radius);
        let bids = fact.advertiser_values();
        for i in 0..n {
            let value = bids[i];
            let utility = |report: f64| {
                let mut b = bids.to_vec();
                b[i] = report;
                let q = factorized::allocation_quantity(&sel, &b, i, report);
                value * q - factorized::factorized_payment(&sel, &b, i)
            };
            let honest = utility(value);
            let mut deviations: Vec<f64> = bids
                .iter()
                .enumerate()
                .filter(|&(i2, _)| i2 != i)
                .flat_map(|(_, &b)| [b, b + 1e-6, (b - 1e-6).max(0.0), b / 2.0])
                .collect();
            deviations.extend([0.0, value / 2.0, value * 2.0, value + 1.0]);
            for dev in deviations {
                assert!(
                    utility(dev) <= honest + 1e-9,
                    "profitable deviation {dev} for advertiser {i} (truth {value})"
                );
                deviation_checks += 1;
            }
        }
    }

    // (b) Single-slot baseline as a scaled-bid auction.
    for _ in 0..100 {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(1..=4);
        let inst = if rng.gen_bool(0.5) {
            harness::gen_pd_instance(n, m, &mut rng)
        } else {
            random_nn_instance(n, m, &mut rng)
        };
        single_slot_baseline(&inst).unwrap();
        for i in 0..n {
            let rule = slate::mechanism::SingleSlotScaleRule::new(&inst, i);
            let threshold = slate::mechanism::AllocationRule::breakpoints(&rule)
                .first()
                .copied()
                .unwrap_or(f64::INFINITY);
            let q = |bid: f64| {
                let mut dummy = ChaCha8Rng::seed_from_u64(0);
                slate::mechanism::AllocationRule::quantity(&rule, bid, &mut dummy)
            };
            let payment = |bid: f64| {
                // Step-function payment: the winning threshold times the
                // quantity, zero otherwise.
                let quantity = {
                    let mut d = ChaCha8Rng::seed_from_u64(0);
                    slate::mechanism::AllocationRule::quantity(&rule, bid, &mut d)
                };
                if quantity > 0.0 && threshold.is_finite() {
                    threshold * quantity
                } else {
                    0.0
                }
            };
            let truth = 1.0;
            let honest = truth * q(truth) - payment(truth);
            for dev in [0.0, 0.5, 0.9, 1.1, 2.0, threshold.min(1e6), (threshold * 1.5).min(1e6)]
            {
                if !dev.is_finite() {
                    continue;
                }
                let util = truth * q(dev) - payment(dev);
                assert!(
                    util <= honest + 1e-9,
                    "single-slot: deviation {dev} beats truth for advertiser {i}"
                );
                deviation_checks += 1;
            }
        }
    }

    // (c) Exact monotonicity of the relaxation objective in each bid.
    let mut lp_checks = 0u64;
    for case in 0..100 {
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(2..=5);
        let inst = random_nn_instance(n, m, &mut rng);
        let advertiser = rng.gen_range(0..n);
        let violations =
            lp_objective_monotonicity(&inst, advertiser, &[0.5, 1.0, 1.5, 2.0]).unwrap();
        assert!(
            violations.is_empty(),
            "case {case}: LP objective dropped at factors {violations:?}"
        );
        lp_checks += 1;
    }
    println!(
        "criterion 12 (truthfulness audits): PASS — {deviation_checks} exact no-deviation checks, LP objective monotone on {lp_checks} instances"
    );
}

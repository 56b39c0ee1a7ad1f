//! Cross-checks the simplex solver against an independent vertex-enumeration
//! oracle on small random programs.
//!
//! Every optimum of a bounded feasible program sits at a vertex, i.e. at the
//! intersection of `n` linearly independent active constraints (rows or box
//! faces). The oracle enumerates all such intersections with Gaussian
//! elimination and keeps the best feasible one; it shares no code with the
//! simplex path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slate::lp::{max_violation, solve_lp_max, LinearProgram, LpError};

const FEAS_TOL: f64 = 1e-7;

/// Solves `M x = rhs` by Gaussian elimination with partial pivoting.
/// Returns `None` when the system is (numerically) singular.
fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| {
            m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap()
        })?;
        if m[pivot][col].abs() < 1e-9 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for c in col..n {
                        m[row][c] -= f * m[col][c];
                    }
                    rhs[row] -= f * rhs[col];
                }
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// Best objective over all feasible constraint-intersection points, or
/// `None` when no intersection is feasible.
fn vertex_enumeration_max(lp: &LinearProgram) -> Option<f64> {
    let n = lp.objective.len();
    // Constraint list: rows a.x = b, then bound faces x_j = lo / hi.
    let mut planes: Vec<(Vec<f64>, f64)> = lp.constraints.clone();
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        planes.push((a.clone(), lo));
        if hi.is_finite() {
            planes.push((a, hi));
        }
    }
    let total = planes.len();
    if total < n {
        return None;
    }
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    // Enumerate all size-n subsets of the planes.
    fn subsets(
        planes: &[(Vec<f64>, f64)],
        lp: &LinearProgram,
        pick: &mut Vec<usize>,
        depth: usize,
        start: usize,
        best: &mut Option<f64>,
    ) {
        let n = lp.objective.len();
        if depth == n {
            let m: Vec<Vec<f64>> = pick.iter().map(|&i| planes[i].0.clone()).collect();
            let rhs: Vec<f64> = pick.iter().map(|&i| planes[i].1).collect();
            if let Some(x) = solve_square(m, rhs) {
                if max_violation(lp, &x) <= FEAS_TOL {
                    let value: f64 =
                        lp.objective.iter().zip(&x).map(|(c, xi)| c * xi).sum();
                    if best.map_or(true, |b| value > b) {
                        *best = Some(value);
                    }
                }
            }
            return;
        }
        for i in start..planes.len() {
            pick[depth] = i;
            subsets(planes, lp, pick, depth + 1, i + 1, best);
        }
    }
    subsets(&planes, lp, &mut pick, 0, 0, &mut best);
    best
}

#[test]
fn simplex_matches_vertex_enumeration_on_random_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut feasible_cases = 0;
    for case in 0..250 {
        let n = rng.gen_range(1..=6usize);
        let rows = rng.gen_range(1..=4usize);
        let objective: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let constraints: Vec<(Vec<f64>, f64)> = (0..rows)
            .map(|_| {
                let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let b = rng.gen_range(-0.5..1.5);
                (a, b)
            })
            .collect();
        let bounds = vec![(0.0, 1.0); n];
        let lp = LinearProgram { objective, constraints, bounds };
        let oracle = vertex_enumeration_max(&lp);
        match solve_lp_max(&lp) {
            Ok(sol) => {
                assert!(
                    max_violation(&lp, &sol.x) <= FEAS_TOL,
                    "case {case}: solution violates constraints"
                );
                let oracle = oracle.expect("simplex found a solution, oracle must too");
                assert!(
                    (sol.value - oracle).abs() <= 1e-6,
                    "case {case}: simplex {} vs vertex enumeration {}",
                    sol.value,
                    oracle
                );
                feasible_cases += 1;
            }
            Err(LpError::Infeasible) => {
                assert!(oracle.is_none(), "case {case}: oracle found a feasible vertex");
            }
            Err(other) => panic!("case {case}: unexpected error {other}"),
        }
    }
    // The generator must actually exercise the optimizer.
    assert!(feasible_cases > 150, "only {feasible_cases} feasible cases");
}

#[test]
fn simplex_matches_vertex_enumeration_on_relaxation_shapes() {
    // Programs shaped like the coverage relaxation: non-negative rows with
    // unit right-hand sides and box [0, 1].
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for case in 0..100 {
        let n = rng.gen_range(1..=6usize);
        let rows = rng.gen_range(1..=5usize);
        let objective: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let constraints: Vec<(Vec<f64>, f64)> = (0..rows)
            .map(|_| {
                let a: Vec<f64> =
                    (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
                (a, 1.0)
            })
            .collect();
        let bounds = vec![(0.0, 1.0); n];
        let lp = LinearProgram { objective, constraints, bounds };
        let sol = solve_lp_max(&lp).expect("box programs are feasible");
        let oracle = vertex_enumeration_max(&lp).expect("feasible");
        assert!(
            (sol.value - oracle).abs() <= 1e-6,
            "case {case}: simplex {} vs vertex enumeration {}",
            sol.value,
            oracle
        );
    }
}

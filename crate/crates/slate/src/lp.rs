//! A small dense linear-program maximizer.
//!
//! Two-phase primal simplex over inequality constraints plus box bounds.
//! Bland's rule keeps it from cycling; the output is deterministic. Built for
//! the relaxations this crate produces (a few hundred rows), not for scale.

use thiserror::Error;

/// maximize `objective . x` subject to `a . x <= b` per constraint and
/// `lo <= x <= hi` per variable. `hi` may be infinite; everything else must
/// be finite with `lo <= hi`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<(Vec<f64>, f64)>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("malformed program: {0}")]
    BadInput(String),
}

const PIVOT_TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 1_000_000;

/// Absolute tolerance on constraint satisfaction and optimality of the
/// returned solution.
pub const LP_TOL: f64 = 1e-7;

struct Tableau {
    rows: usize,
    cols: usize,
    /// rows x (cols + 1); the last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    z: Vec<f64>,
    artificial_from: usize,
    iterations: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col];
        for v in self.a[row].iter_mut() {
            *v /= p;
        }
        for r in 0..self.rows {
            if r != row {
                let f = self.a[r][col];
                if f != 0.0 {
                    for c in 0..=self.cols {
                        self.a[r][c] -= f * self.a[row][c];
                    }
                }
            }
        }
        let f = self.z[col];
        if f != 0.0 {
            for c in 0..=self.cols {
                self.z[c] -= f * self.a[row][c];
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule: lowest-index improving column enters; ties in the ratio
    /// test go to the row whose basic variable has the lowest index.
    fn run(&mut self, allow_artificial: bool) -> Result<(), LpError> {
        loop {
            self.iterations += 1;
            if self.iterations > MAX_ITERATIONS {
                return Err(LpError::IterationLimit);
            }
            let mut entering = None;
            for j in 0..self.cols {
                if !allow_artificial && j >= self.artificial_from {
                    break;
                }
                if self.z[j] < -PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let coef = self.a[r][col];
                if coef > PIVOT_TOL {
                    let ratio = self.a[r][self.cols] / coef;
                    match leaving {
                        None => leaving = Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - PIVOT_TOL
                                || ((ratio - bratio).abs() <= PIVOT_TOL
                                    && self.basis[r] < self.basis[br])
                            {
                                leaving = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col);
        }
    }

    fn price_out(&mut self, cost: &[f64]) {
        self.z = vec![0.0; self.cols + 1];
        for j in 0..self.cols {
            self.z[j] = -cost[j];
        }
        for r in 0..self.rows {
            let ck = cost[self.basis[r]];
            if ck != 0.0 {
                for c in 0..=self.cols {
                    self.z[c] += ck * self.a[r][c];
                }
            }
        }
    }
}

pub fn solve_lp_max(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let n = lp.objective.len();
    if lp.bounds.len() != n {
        return Err(LpError::BadInput(format!(
            "{} bounds for {} variables",
            lp.bounds.len(),
            n
        )));
    }
    for (a, b) in &lp.constraints {
        if a.len() != n {
            return Err(LpError::BadInput("constraint width mismatch".into()));
        }
        if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(LpError::BadInput("non-finite constraint".into()));
        }
    }
    for &(lo, hi) in &lp.bounds {
        if !lo.is_finite() || hi < lo {
            return Err(LpError::BadInput("bad variable bounds".into()));
        }
    }

    // Shift to y = x - lo >= 0; finite upper bounds become extra rows.
    let lows: Vec<f64> = lp.bounds.iter().map(|&(lo, _)| lo).collect();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (a, b) in &lp.constraints {
        let shift: f64 = a.iter().zip(&lows).map(|(ai, lo)| ai * lo).sum();
        rows.push((a.clone(), b - shift));
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if hi.is_finite() {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            rows.push((a, hi - lo));
        }
    }

    let r = rows.len();
    let slack_from = n;
    let artificial_from = n + r;
    let mut n_art = 0usize;
    let needs_artificial: Vec<bool> = rows.iter().map(|&(_, b)| b < 0.0).collect();
    for &need in &needs_artificial {
        if need {
            n_art += 1;
        }
    }
    let cols = n + r + n_art;

    let mut a = vec![vec![0.0; cols + 1]; r];
    let mut basis = vec![0usize; r];
    let mut art = artificial_from;
    for (i, (coefs, b)) in rows.iter().enumerate() {
        let flip = if needs_artificial[i] { -1.0 } else { 1.0 };
        for (j, &c) in coefs.iter().enumerate() {
            a[i][j] = flip * c;
        }
        a[i][slack_from + i] = flip;
        a[i][cols] = flip * b;
        if needs_artificial[i] {
            a[i][art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = slack_from + i;
        }
    }

    let mut t = Tableau {
        rows: r,
        cols,
        a,
        basis,
        z: vec![0.0; cols + 1],
        artificial_from,
        iterations: 0,
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        for j in artificial_from..cols {
            phase1[j] = -1.0;
        }
        t.price_out(&phase1);
        t.run(true)?;
        if t.z[cols] < -1e-7 {
            return Err(LpError::Infeasible);
        }
        // Kick leftover artificials out of the basis where possible.
        for row in 0..t.rows {
            if t.basis[row] >= artificial_from {
                if let Some(col) = (0..artificial_from)
                    .find(|&j| t.a[row][j].abs() > PIVOT_TOL)
                {
                    t.pivot(row, col);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    t.price_out(&cost);
    t.run(false)?;

    let mut y = vec![0.0; cols];
    for (row, &b) in t.basis.iter().enumerate() {
        y[b] = t.a[row][t.cols];
    }
    let x: Vec<f64> = (0..n).map(|j| lows[j] + y[j]).collect();
    let shift: f64 = lp.objective.iter().zip(&lows).map(|(c, lo)| c * lo).sum();
    Ok(LpSolution { value: t.z[cols] + shift, x, iterations: t.iterations })
}

/// Largest violation of the program's constraints and bounds at `x`.
pub fn max_violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, b) in &lp.constraints {
        let lhs: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum();
        worst = worst.max(lhs - b);
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        worst = worst.max(lo - x[j]);
        if hi.is_finite() {
            worst = worst.max(x[j] - hi);
        }
    }
    worst
}

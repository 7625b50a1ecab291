//! Exact solver for small projection QPs
//!
//! ```text
//!     minimize    ‖u − u_nom‖²
//!     subject to  A u ≤ b
//! ```
//!
//! The Hessian is the identity, so for a candidate active set `S` the KKT
//! system collapses to `(A_S A_Sᵀ) λ = A_S u_nom − b_S`, `u = u_nom − A_Sᵀ λ`.
//! Candidate sets are enumerated by size and then lexicographically; the
//! first primal- and dual-feasible candidate is the unique optimum. At the
//! sizes the safety filter produces (two variables, at most five rows) that
//! is a few dozen 2×2 solves, with no pivoting rules or warm-start state.

use crate::error::{ensure, Error, Result};
use nalgebra::{DMatrix, DVector};

/// Rows whose normalized elimination pivot falls below this are treated as
/// linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-12;
/// Multipliers down to this value are accepted as non-negative.
pub const MULTIPLIER_TOLERANCE: f64 = -1e-10;
/// Primal feasibility slack, scaled by `max(1, |b_i|)`.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub u_nom: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl QpProblem {
    pub fn new(u_nom: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        Self { u_nom, a, b }
    }

    pub fn unconstrained(u_nom: DVector<f64>) -> Self {
        let n = u_nom.len();
        Self { u_nom, a: DMatrix::zeros(0, n), b: DVector::zeros(0) }
    }

    pub fn num_vars(&self) -> usize {
        self.u_nom.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// `max_i (A_i u − b_i)`, or `-inf` without rows.
    pub fn max_violation(&self, u: &DVector<f64>) -> f64 {
        (0..self.num_rows())
            .map(|i| self.a.row(i).dot(&u.transpose()) - self.b[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_feasible(&self, u: &DVector<f64>) -> bool {
        (0..self.num_rows()).all(|i| self.a.row(i).dot(&u.transpose()) - self.b[i] <= row_tolerance(self.b[i]))
    }

    fn validate(&self) -> Result<()> {
        let (m, n) = (self.num_rows(), self.num_vars());
        ensure(n >= 1, || "QP needs at least one variable".into())?;
        ensure(self.a.nrows() == m && self.a.ncols() == n, || {
            format!("constraint matrix is {}×{}, expected {m}×{n}", self.a.nrows(), self.a.ncols())
        })?;
        let finite = self.u_nom.iter().chain(self.a.iter()).chain(self.b.iter()).all(|v| v.is_finite());
        ensure(finite, || "QP data must be finite".into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: DVector<f64>,
    /// Indices of the rows held tight at the optimum, ascending.
    pub active_set: Vec<usize>,
    pub multipliers: Vec<f64>,
    /// `‖u − u_nom‖²`
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeLimits {
    pub max_vars: usize,
    pub max_rows: usize,
}

impl Default for SizeLimits {
    fn default() -> Self {
        Self { max_vars: 4, max_rows: 8 }
    }
}

pub fn solve(problem: &QpProblem) -> Result<QpSolution> {
    solve_with_limits(problem, SizeLimits::default())
}

pub fn solve_with_limits(problem: &QpProblem, limits: SizeLimits) -> Result<QpSolution> {
    problem.validate()?;
    let (m, n) = (problem.num_rows(), problem.num_vars());
    if n > limits.max_vars || m > limits.max_rows {
        return Err(Error::QpTooLarge { vars: n, rows: m, max_vars: limits.max_vars, max_rows: limits.max_rows });
    }

    for size in 0..=n.min(m) {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            if let Some(sol) = try_active_set(problem, &subset) {
                return Ok(sol);
            }
            if !next_combination(&mut subset, m) {
                break;
            }
        }
    }
    Err(Error::InfeasibleQp { rows: m })
}

fn row_tolerance(b: f64) -> f64 {
    FEASIBILITY_TOLERANCE * b.abs().max(1.0)
}

fn try_active_set(problem: &QpProblem, subset: &[usize]) -> Option<QpSolution> {
    let k = subset.len();
    let a_s = DMatrix::from_fn(k, problem.num_vars(), |r, c| problem.a[(subset[r], c)]);
    if !has_full_row_rank(&a_s) {
        return None;
    }
    let gram = &a_s * a_s.transpose();
    let rhs = &a_s * &problem.u_nom - DVector::from_fn(k, |r, _| problem.b[subset[r]]);
    let lambda = solve_square(gram, rhs)?;
    if lambda.iter().any(|&l| l < MULTIPLIER_TOLERANCE) {
        return None;
    }
    let u = &problem.u_nom - a_s.transpose() * &lambda;
    if !problem.is_feasible(&u) {
        return None;
    }
    let objective = (&u - &problem.u_nom).norm_squared();
    Some(QpSolution { u, active_set: subset.to_vec(), multipliers: lambda.iter().copied().collect(), objective })
}

/// Advances `subset` to the next `k`-combination of `0..m` in lexicographic
/// order; returns false after the last one.
fn next_combination(subset: &mut [usize], m: usize) -> bool {
    let k = subset.len();
    for i in (0..k).rev() {
        if subset[i] < m - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting on unit-normalized rows.
fn has_full_row_rank(rows: &DMatrix<f64>) -> bool {
    let (k, n) = rows.shape();
    if k > n {
        return false;
    }
    let mut work = rows.clone();
    for r in 0..k {
        let norm = work.row(r).norm();
        if norm == 0.0 {
            return false;
        }
        work.row_mut(r).scale_mut(1.0 / norm);
    }
    let mut pivot_row = 0;
    for col in 0..n {
        if pivot_row == k {
            break;
        }
        let (best, val) = (pivot_row..k)
            .map(|r| (r, work[(r, col)].abs()))
            .fold((pivot_row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= RANK_TOLERANCE {
            continue;
        }
        work.swap_rows(pivot_row, best);
        for r in pivot_row + 1..k {
            let factor = work[(r, col)] / work[(pivot_row, col)];
            for c in col..n {
                work[(r, c)] -= factor * work[(pivot_row, c)];
            }
        }
        pivot_row += 1;
    }
    pivot_row == k
}

fn solve_square(mut a: DMatrix<f64>, mut b: DVector<f64>) -> Option<DVector<f64>> {
    let n = b.len();
    for col in 0..n {
        let best = (col..n).max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))?;
        if a[(best, col)] == 0.0 {
            return None;
        }
        a.swap_rows(col, best);
        b.swap_rows(col, best);
        for r in col + 1..n {
            let factor = a[(r, col)] / a[(col, col)];
            for c in col..n {
                a[(r, c)] -= factor * a[(col, c)];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = DVector::zeros(n);
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[(r, c)] * x[c]).sum();
        x[r] = (b[r] - tail) / a[(r, r)];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

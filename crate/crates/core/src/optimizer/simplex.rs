//! Two-phase revised simplex for small and medium dense-basis LPs.
//!
//! Problems are `max cᵀx` subject to linear rows and `0 ≤ x ≤ u`. Upper
//! bounds that already follow from a row with non-negative coefficients are
//! dropped in presolve; the rest become explicit rows. Pricing is Dantzig's
//! rule, switching to Bland's rule after a run of degenerate pivots and back
//! once the objective moves, so the pivot sequence is fully deterministic.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-6;
const STALL_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Per-variable upper bound, `f64::INFINITY` for none.
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    /// `certificate` holds one multiplier per row of the program (explicit
    /// upper-bound rows follow, one per bounded variable that needed one, in
    /// variable order). It satisfies `yᵀA ≥ 0` over the variables, has the sign
    /// each row's sense allows, and `yᵀb < 0`.
    #[error("infeasible: phase-one residual {residual:e}")]
    Infeasible { residual: f64, certificate: Vec<f64> },
    #[error("unbounded objective")]
    Unbounded,
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("solution violates constraints by {0:e}")]
    Tolerance(f64),
    #[error("malformed program: {0}")]
    Malformed(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Rows actually handed to the simplex: the program's rows plus the upper
/// bounds presolve could not drop.
fn effective_rows(lp: &LinearProgram) -> Vec<Row> {
    let n = lp.objective.len();
    // Tightest bound each variable gets from a ≤/= row with non-negative
    // coefficients and non-negative rhs.
    let mut implied = vec![f64::INFINITY; n];
    for row in &lp.rows {
        if row.sense == Sense::Ge || row.rhs < 0.0 || row.coefs.iter().any(|&(_, a)| a < 0.0) {
            continue;
        }
        for &(j, a) in &row.coefs {
            if a > 0.0 {
                implied[j] = implied[j].min(row.rhs / a);
            }
        }
    }
    let mut rows = lp.rows.clone();
    for j in 0..n {
        if lp.upper[j].is_finite() && implied[j] > lp.upper[j] {
            rows.push(Row { coefs: vec![(j, 1.0)], sense: Sense::Le, rhs: lp.upper[j] });
        }
    }
    rows
}

struct Tableau {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    /// First artificial column.
    n_real: usize,
    b: Vec<f64>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    binv: Matrix,
    xb: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (yk, bk) in y.iter_mut().zip(self.binv.row(r)) {
                    *yk += cb * bk;
                }
            }
        }
        y
    }

    fn ftran(&self, col: usize) -> Vec<f64> {
        let mut alpha = vec![0.0; self.m];
        for (r, a) in alpha.iter_mut().enumerate() {
            let row = self.binv.row(r);
            *a = self.cols[col].iter().map(|&(k, v)| row[k] * v).sum();
        }
        alpha
    }

    fn pivot(&mut self, p: usize, q: usize, alpha: &[f64]) {
        let theta = self.xb[p] / alpha[p];
        for r in 0..self.m {
            if r != p {
                self.xb[r] -= theta * alpha[r];
            }
        }
        self.xb[p] = theta;
        let inv = 1.0 / alpha[p];
        self.binv.row_mut(p).iter_mut().for_each(|v| *v *= inv);
        let prow: Vec<f64> = self.binv.row(p).to_vec();
        for r in 0..self.m {
            let f = alpha[r];
            if r != p && f != 0.0 {
                for (v, pv) in self.binv.row_mut(r).iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
        self.basic_row[self.basis[p]] = None;
        self.basis[p] = q;
        self.basic_row[q] = Some(p);
        self.iterations += 1;
        if self.iterations % 100 == 0 {
            self.refresh();
        }
    }

    fn refresh(&mut self) {
        self.xb = self.binv.mul_vec(&self.b);
    }

    /// Maximizes `cost` over columns `0..allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<Outcome, LpError> {
        let mut stall = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            let bland = stall >= STALL_LIMIT;
            let y = self.duals(cost);
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..allowed {
                if self.basic_row[j].is_some() {
                    continue;
                }
                let d = cost[j] - self.cols[j].iter().map(|&(k, v)| y[k] * v).sum::<f64>();
                if d > COST_TOL {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| d > best) {
                        entering = Some((j, d));
                    }
                }
            }
            let Some((q, _)) = entering else { return Ok(Outcome::Optimal) };
            let alpha = self.ftran(q);
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                if alpha[r] > PIVOT_TOL {
                    let ratio = self.xb[r].max(0.0) / alpha[r];
                    let better = match leave {
                        None => true,
                        Some((p, best)) => {
                            if ratio < best - 1e-12 {
                                true
                            } else if ratio <= best + 1e-12 {
                                if bland { self.basis[r] < self.basis[p] } else { alpha[r] > alpha[p] }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((p, ratio)) = leave else { return Ok(Outcome::Unbounded) };
            if ratio <= 1e-12 {
                stall += 1;
            } else {
                stall = 0;
            }
            self.pivot(p, q, &alpha);
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpResult, LpError> {
    let n = lp.objective.len();
    if lp.upper.len() != n {
        return Err(LpError::Malformed("one upper bound per variable"));
    }
    if lp.objective.iter().chain(&lp.upper).any(|v| v.is_nan()) || lp.upper.iter().any(|&u| u < 0.0) {
        return Err(LpError::Malformed("bounds and objective must be numbers, bounds non-negative"));
    }
    let rows = effective_rows(lp);
    if rows.iter().any(|r| !r.rhs.is_finite() || r.coefs.iter().any(|&(j, a)| j >= n || !a.is_finite())) {
        return Err(LpError::Malformed("row references unknown variable or non-finite value"));
    }
    let m = rows.len();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let sign: Vec<f64> = rows.iter().map(|r| if r.rhs < 0.0 { -1.0 } else { 1.0 }).collect();
    for (i, row) in rows.iter().enumerate() {
        for &(j, a) in &row.coefs {
            if a != 0.0 {
                cols[j].push((i, sign[i] * a));
            }
        }
    }
    let mut basis = vec![usize::MAX; m];
    for (i, row) in rows.iter().enumerate() {
        let s = match row.sense {
            Sense::Le => 1.0,
            Sense::Ge => -1.0,
            Sense::Eq => continue,
        };
        let coef = s * sign[i];
        if coef > 0.0 {
            basis[i] = cols.len();
        }
        cols.push(vec![(i, coef)]);
    }
    let n_real = cols.len();
    for (i, slot) in basis.iter_mut().enumerate() {
        if *slot == usize::MAX {
            *slot = cols.len();
            cols.push(vec![(i, 1.0)]);
        }
    }
    let total = cols.len();
    let mut basic_row = vec![None; total];
    for (r, &c) in basis.iter().enumerate() {
        basic_row[c] = Some(r);
    }
    let b: Vec<f64> = rows.iter().zip(&sign).map(|(r, s)| r.rhs * s).collect();
    let mut t = Tableau {
        m,
        cols,
        n_real,
        xb: b.clone(),
        b,
        basis,
        basic_row,
        binv: Matrix::identity(m),
        iterations: 0,
        max_iterations: 50 * (m + total) + 1000,
    };

    if t.n_real < total {
        let mut cost1 = vec![0.0; total];
        cost1[t.n_real..].iter_mut().for_each(|c| *c = -1.0);
        t.optimize(&cost1, total)?;
        t.refresh();
        let phase1: f64 = t.basis.iter().zip(&t.xb).filter(|(&c, _)| c >= t.n_real).map(|(_, v)| *v).sum();
        let scale = 1.0 + t.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if phase1 > FEAS_TOL * scale {
            let y = t.duals(&cost1);
            // Duals are for the sign-normalized rows; undo the flip.
            let certificate = y.iter().zip(&sign).map(|(v, s)| v * s).collect();
            return Err(LpError::Infeasible { residual: phase1, certificate });
        }
        // Move zero-level artificials out of the basis where a real column
        // can replace them; the rest sit on redundant rows.
        for p in 0..m {
            if t.basis[p] < t.n_real {
                continue;
            }
            let row: Vec<f64> = t.binv.row(p).to_vec();
            let q = (0..t.n_real).find(|&j| {
                t.basic_row[j].is_none() && t.cols[j].iter().map(|&(k, v)| row[k] * v).sum::<f64>().abs() > 1e-7
            });
            if let Some(q) = q {
                let alpha = t.ftran(q);
                t.xb[p] = 0.0;
                t.pivot(p, q, &alpha);
            }
        }
    }

    let mut cost2 = vec![0.0; total];
    cost2[..n].copy_from_slice(&lp.objective);
    if let Outcome::Unbounded = t.optimize(&cost2, t.n_real)? {
        return Err(LpError::Unbounded);
    }
    t.refresh();
    let mut x = vec![0.0; n];
    for (r, &c) in t.basis.iter().enumerate() {
        if c < n {
            x[c] = t.xb[r];
        }
    }
    for v in &mut x {
        if v.abs() < 1e-12 {
            *v = 0.0;
        }
    }
    let violation = max_violation(lp, &x);
    if violation > FEAS_TOL {
        return Err(LpError::Tolerance(violation));
    }
    let objective = crate::math::dot(&lp.objective, &x);
    Ok(LpResult { x, objective, iterations: t.iterations })
}

/// Largest violation of any row or bound by `x`.
pub fn max_violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (j, &v) in x.iter().enumerate() {
        worst = worst.max(-v).max(v - lp.upper[j]);
    }
    for row in &lp.rows {
        let lhs: f64 = row.coefs.iter().map(|&(j, a)| a * x[j]).sum();
        let gap = match row.sense {
            Sense::Le => lhs - row.rhs,
            Sense::Ge => row.rhs - lhs,
            Sense::Eq => (lhs - row.rhs).abs(),
        };
        worst = worst.max(gap);
    }
    worst
}

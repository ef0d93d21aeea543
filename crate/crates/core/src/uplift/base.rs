//! Base regressors: ridge (closed form) and gradient-boosted stumps.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::UpliftError;
use crate::linalg::{Cholesky, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StumpsSpec {
    pub rounds: usize,
    pub learning_rate: f64,
    /// Minimum rows on each side of a split.
    pub min_leaf: usize,
}

impl Default for StumpsSpec {
    fn default() -> Self {
        Self { rounds: 200, learning_rate: 0.1, min_leaf: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaseSpec {
    Ridge { lambda: f64 },
    BoostedStumps(StumpsSpec),
}

impl Default for BaseSpec {
    fn default() -> Self {
        BaseSpec::Ridge { lambda: 1e-6 }
    }
}

/// Linear model with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub intercept: f64,
    pub coefs: Vec<f64>,
}

impl RidgeModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + crate::math::dot(&self.coefs, x)
    }
}

/// Minimizes `Σ wᵢ (yᵢ − b − βᵀxᵢ)² + λ‖β‖²`.
///
/// The design is centered so the intercept stays out of the penalty. A
/// singular Gram matrix (e.g. a constant column with `λ = 0`) gets a growing
/// diagonal jitter until it factors; the constant column then receives a
/// zero coefficient.
pub fn fit_ridge(x: &Matrix, y: &[f64], weights: Option<&[f64]>, lambda: f64) -> RidgeModel {
    let (n, p) = (x.rows(), x.cols());
    assert_eq!(n, y.len());
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let w_sum: f64 = (0..n).map(w).sum();
    let mut x_mean = vec![0.0; p];
    let mut y_mean = 0.0;
    for i in 0..n {
        let wi = w(i);
        for (m, v) in x_mean.iter_mut().zip(x.row(i)) {
            *m += wi * v;
        }
        y_mean += wi * y[i];
    }
    if w_sum > 0.0 {
        x_mean.iter_mut().for_each(|m| *m /= w_sum);
        y_mean /= w_sum;
    }
    if p == 0 {
        return RidgeModel { intercept: y_mean, coefs: Vec::new() };
    }
    let mut gram = Matrix::zeros(p, p);
    let mut rhs = vec![0.0; p];
    let mut xc = vec![0.0; p];
    for i in 0..n {
        let wi = w(i);
        for (c, (v, m)) in xc.iter_mut().zip(x.row(i).iter().zip(&x_mean)) {
            *c = v - m;
        }
        let yc = y[i] - y_mean;
        for a in 0..p {
            let wa = wi * xc[a];
            rhs[a] += wa * yc;
            let row = gram.row_mut(a);
            for b in 0..=a {
                row[b] += wa * xc[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            let v = gram[(a, b)];
            gram.row_mut(b)[a] = v;
        }
        gram.row_mut(a)[a] += lambda;
    }
    let coefs = solve_spd_with_jitter(&gram, &rhs);
    let intercept = y_mean - crate::math::dot(&coefs, &x_mean);
    RidgeModel { intercept, coefs }
}

/// Solves `A z = b`, adding diagonal jitter if `A` is not numerically
/// positive definite.
pub(crate) fn solve_spd_with_jitter(a: &Matrix, b: &[f64]) -> Vec<f64> {
    if let Ok(ch) = Cholesky::factor(a) {
        return ch.solve(b);
    }
    let p = a.rows();
    let scale = (0..p).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut jitter = 1e-12 * scale;
    loop {
        let mut aj = a.clone();
        for i in 0..p {
            aj.row_mut(i)[i] += jitter;
        }
        if let Ok(ch) = Cholesky::factor(&aj) {
            log::debug!("ridge system needed diagonal jitter {jitter:e}");
            return ch.solve(b);
        }
        jitter *= 100.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

impl Stump {
    fn eval(&self, x: &[f64]) -> f64 {
        if x[self.feature] <= self.threshold { self.left } else { self.right }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StumpsModel {
    pub base: f64,
    pub stumps: Vec<Stump>,
}

impl StumpsModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.stumps.iter().map(|s| s.eval(x)).sum::<f64>()
    }
}

/// Stage-wise least-squares boosting of depth-one trees.
pub fn fit_stumps(x: &Matrix, y: &[f64], spec: &StumpsSpec) -> StumpsModel {
    let (n, p) = (x.rows(), x.cols());
    let base = if n == 0 { 0.0 } else { y.iter().sum::<f64>() / n as f64 };
    let mut resid: Vec<f64> = y.iter().map(|v| v - base).collect();
    let order: Vec<Vec<usize>> = (0..p)
        .map(|j| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[(a, j)].total_cmp(&x[(b, j)]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let min_leaf = spec.min_leaf.max(1);
    let mut stumps = Vec::with_capacity(spec.rounds);
    for _ in 0..spec.rounds {
        let total: f64 = resid.iter().sum();
        // (gain, feature, split position, left sum)
        let mut best: Option<(f64, usize, usize, f64)> = None;
        for (j, idx) in order.iter().enumerate() {
            let mut left = 0.0;
            for k in 0..n.saturating_sub(1) {
                left += resid[idx[k]];
                let nl = k + 1;
                if nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                if x[(idx[k], j)] == x[(idx[k + 1], j)] {
                    continue;
                }
                let right = total - left;
                let gain = left * left / nl as f64 + right * right / (n - nl) as f64;
                if best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, j, k, left));
                }
            }
        }
        let Some((_, j, k, left)) = best else { break };
        let idx = &order[j];
        let nl = k + 1;
        let stump = Stump {
            feature: j,
            threshold: 0.5 * (x[(idx[k], j)] + x[(idx[k + 1], j)]),
            left: spec.learning_rate * left / nl as f64,
            right: spec.learning_rate * (total - left) / (n - nl) as f64,
        };
        for (pos, &i) in idx.iter().enumerate() {
            resid[i] -= if pos < nl { stump.left } else { stump.right };
        }
        stumps.push(stump);
    }
    StumpsModel { base, stumps }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BaseRegressor {
    Ridge(RidgeModel),
    BoostedStumps(StumpsModel),
}

impl BaseRegressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            BaseRegressor::Ridge(m) => m.predict(x),
            BaseRegressor::BoostedStumps(m) => m.predict(x),
        }
    }

    pub fn predict_rows(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }

    pub fn as_ridge(&self) -> Option<&RidgeModel> {
        match self {
            BaseRegressor::Ridge(m) => Some(m),
            BaseRegressor::BoostedStumps(_) => None,
        }
    }

    pub fn as_ridge_mut(&mut self) -> Option<&mut RidgeModel> {
        match self {
            BaseRegressor::Ridge(m) => Some(m),
            BaseRegressor::BoostedStumps(_) => None,
        }
    }
}

pub fn fit_base(x: &Matrix, y: &[f64], spec: &BaseSpec) -> Result<BaseRegressor, UpliftError> {
    if x.rows() != y.len() {
        return Err(UpliftError::LengthMismatch { expected: x.rows(), found: y.len() });
    }
    if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(UpliftError::NonFinite);
    }
    match *spec {
        BaseSpec::Ridge { lambda } => {
            if !(lambda >= 0.0) {
                return Err(UpliftError::InvalidSpec("ridge lambda must be non-negative"));
            }
            if x.rows() < x.cols() + 1 {
                return Err(UpliftError::TooFewRows { rows: x.rows(), needed: x.cols() + 1 });
            }
            Ok(BaseRegressor::Ridge(fit_ridge(x, y, None, lambda)))
        }
        BaseSpec::BoostedStumps(s) => {
            if x.rows() == 0 {
                return Err(UpliftError::TooFewRows { rows: 0, needed: 1 });
            }
            if !(s.learning_rate > 0.0 && s.learning_rate <= 1.0) {
                return Err(UpliftError::InvalidSpec("learning rate must lie in (0,1]"));
            }
            Ok(BaseRegressor::BoostedStumps(fit_stumps(x, y, &s)))
        }
    }
}

/// Rows a base learner needs for `dim` features.
pub(crate) fn min_rows(spec: &BaseSpec, dim: usize) -> usize {
    match spec {
        BaseSpec::Ridge { .. } => dim + 1,
        BaseSpec::BoostedStumps(_) => 1,
    }
}
